#include "gazekit/ellipse.hpp"

#include "gazekit/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gazekit {

double Conic::eval(const Vec2& p) const {
  const double x = p.x(), y = p.y();
  return coeffs[0] * x * x + coeffs[1] * x * y + coeffs[2] * y * y + coeffs[3] * x +
         coeffs[4] * y + coeffs[5];
}

Vec2 Conic::gradient(const Vec2& p) const {
  const double x = p.x(), y = p.y();
  return {2.0 * coeffs[0] * x + coeffs[1] * y + coeffs[3],
          coeffs[1] * x + 2.0 * coeffs[2] * y + coeffs[4]};
}

Conic to_conic(const Ellipse& e) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double ia = 1.0 / (e.a * e.a), ib = 1.0 / (e.b * e.b);
  const double A = c * c * ia + s * s * ib;
  const double B = 2.0 * c * s * (ia - ib);
  const double C = s * s * ia + c * c * ib;
  const double x0 = e.center.x(), y0 = e.center.y();
  Conic q;
  q.coeffs << A, B, C, -2.0 * A * x0 - B * y0, -B * x0 - 2.0 * C * y0,
      A * x0 * x0 + B * x0 * y0 + C * y0 * y0 - 1.0;
  return q;
}

Ellipse to_ellipse(const Conic& q) {
  const double A = q.coeffs[0], B = q.coeffs[1], C = q.coeffs[2];
  const double D = q.coeffs[3], E = q.coeffs[4], F = q.coeffs[5];
  const double det = 4.0 * A * C - B * B;
  if (!(det > 0.0) || !std::isfinite(det)) throw DegenerateError("conic is not an ellipse");

  const double x0 = (B * E - 2.0 * C * D) / det;
  const double y0 = (B * D - 2.0 * A * E) / det;
  const double f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F;

  Eigen::Matrix2d m;
  m << A, B / 2.0, B / 2.0, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  const double l0 = es.eigenvalues()[0], l1 = es.eigenvalues()[1];  // ascending
  const double r0 = -f0 / l0, r1 = -f0 / l1;
  if (!(r0 > 0.0) || !(r1 > 0.0)) throw DegenerateError("conic is an imaginary ellipse");

  // The smaller eigenvalue belongs to the major axis.
  const Eigen::Vector2d major = es.eigenvectors().col(0);
  return make_ellipse({x0, y0}, std::sqrt(r0), std::sqrt(r1), std::atan2(major.y(), major.x()));
}

Ellipse fit_ellipse(std::span<const Vec2> points) {
  const std::size_t n = points.size();
  if (n < 5) throw DegenerateError("underdetermined: ellipse fit needs at least 5 points");

  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& p : points) spread += (p - mean).squaredNorm();
  spread = std::sqrt(spread / static_cast<double>(n));
  if (!(spread > 0.0)) throw DegenerateError("underdetermined: coincident points");
  const double scale = 1.0 / spread;

  // Scatter matrices of the quadratic (D1) and linear (D2) design blocks.
  Eigen::Matrix3d s1 = Eigen::Matrix3d::Zero(), s2 = Eigen::Matrix3d::Zero(),
                  s3 = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const double x = (p.x() - mean.x()) * scale, y = (p.y() - mean.y()) * scale;
    const Eigen::Vector3d d1(x * x, x * y, y * y);
    const Eigen::Vector3d d2(x, y, 1.0);
    s1 += d1 * d1.transpose();
    s2 += d1 * d2.transpose();
    s3 += d2 * d2.transpose();
  }

  Eigen::FullPivLU<Eigen::Matrix3d> s3_lu(s3);
  s3_lu.setThreshold(1e-10);
  if (!s3_lu.isInvertible()) throw DegenerateError("underdetermined: collinear points");
  const Eigen::Matrix3d t = -s3_lu.solve(s2.transpose());
  const Eigen::Matrix3d reduced = s1 + s2 * t;
  // Premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d m;
  m.row(0) = reduced.row(2) / 2.0;
  m.row(1) = -reduced.row(1);
  m.row(2) = reduced.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> es(m);
  if (es.info() != Eigen::Success) throw DegenerateError("underdetermined: eigen solve failed");

  int best = -1;
  double best_lambda = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3cd v = es.eigenvectors().col(i);
    if (std::abs(es.eigenvalues()[i].imag()) > 1e-9 * (1.0 + std::abs(es.eigenvalues()[i].real())))
      continue;
    const Eigen::Vector3d r = v.real().normalized();
    const double cond = 4.0 * r[0] * r[2] - r[1] * r[1];
    if (cond <= 0.0) continue;
    const double lambda = std::abs(es.eigenvalues()[i].real());
    if (lambda < best_lambda) {
      best_lambda = lambda;
      best = i;
    }
  }
  if (best < 0) throw DegenerateError("underdetermined: no ellipse satisfies the constraint");

  const Eigen::Vector3d a1 = es.eigenvectors().col(best).real();
  const Eigen::Vector3d a2 = t * a1;

  // Undo the normalization x' = s (x - mx).
  const double A = a1[0], B = a1[1], C = a1[2], D = a2[0], E = a2[1], F = a2[2];
  const double s = scale, s2c = s * s, mx = mean.x(), my = mean.y();
  Conic q;
  q.coeffs[0] = A * s2c;
  q.coeffs[1] = B * s2c;
  q.coeffs[2] = C * s2c;
  q.coeffs[3] = -2.0 * A * s2c * mx - B * s2c * my + D * s;
  q.coeffs[4] = -B * s2c * mx - 2.0 * C * s2c * my + E * s;
  q.coeffs[5] = A * s2c * mx * mx + B * s2c * mx * my + C * s2c * my * my - D * s * mx -
                E * s * my + F;
  try {
    return to_ellipse(q);
  } catch (const DegenerateError&) {
    throw DegenerateError("underdetermined: fitted conic is not a real ellipse");
  }
}

double circumference(const Ellipse& e) {
  if (!(e.a > 0.0) || !(e.b > 0.0)) throw DataError("ellipse axes must be positive");
  const double sum = e.a + e.b;
  const double h = ((e.a - e.b) / sum) * ((e.a - e.b) / sum);
  return std::numbers::pi * sum * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

double sampson_distance(const Conic& c, const Vec2& p) {
  const double g = c.gradient(p).norm();
  const double v = std::abs(c.eval(p));
  if (g < 1e-12) return std::numeric_limits<double>::infinity();
  return v / g;
}

double rms_residual(const Ellipse& e, std::span<const Vec2> points) {
  if (points.empty()) return 0.0;
  const Conic c = to_conic(e);
  double acc = 0.0;
  for (const auto& p : points) {
    const double d = sampson_distance(c, p);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(points.size()));
}

namespace {

// Root of sum((r_i z_i / (r_i + s))^2) - 1 on s > -1 for the first quadrant
// (robust bisection, after D. Eberly).
double distance_root(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 200; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double ratio0 = n0 / (s + r0), ratio1 = z1 / (s + 1.0);
    const double g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
    if (g > 0.0) {
      s0 = s;
    } else if (g < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

// Distance from (y0, y1) in the first quadrant to the axis-aligned ellipse
// with semi-axes e0 >= e1.
double quadrant_distance(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0, z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g != 0.0) {
        const double r0 = (e0 / e1) * (e0 / e1);
        const double sbar = distance_root(r0, z0, z1, g);
        const double x0 = r0 * y0 / (sbar + r0);
        const double x1 = y1 / (sbar + 1.0);
        return std::hypot(x0 - y0, x1 - y1);
      }
      return 0.0;
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0, denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0;
    const double x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0));
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

}  // namespace

double point_ellipse_distance(const Ellipse& e, const Vec2& p) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const Vec2 d = p - e.center;
  const double u = c * d.x() + s * d.y();
  const double v = -s * d.x() + c * d.y();
  return quadrant_distance(e.a, e.b, std::abs(u), std::abs(v));
}

}  // namespace gazekit
