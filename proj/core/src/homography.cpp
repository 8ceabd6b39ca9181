#include "gazekit/homography.hpp"

#include "gazekit/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <vector>

namespace gazekit {

Homography::Homography(const Eigen::Matrix3d& h) : h_(h) {
  if (!h.allFinite()) throw DegenerateError("homography is not finite");
  const double scale = h.cwiseAbs().maxCoeff();
  if (scale == 0.0 || std::abs(h.determinant()) <= 1e-12 * scale * scale * scale)
    throw DegenerateError("homography is singular");
  if (std::abs(h_(2, 2)) > 1e-15 * scale) h_ /= h_(2, 2);
}

Vec2 Homography::apply(const Vec2& p) const {
  const Eigen::Vector3d q = h_ * Eigen::Vector3d(p.x(), p.y(), 1.0);
  const double tol = 1e-12 * h_.row(2).cwiseAbs().sum() * (1.0 + p.cwiseAbs().maxCoeff());
  if (std::abs(q.z()) <= tol || !q.allFinite()) throw DegenerateError("degenerate projection");
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

Homography Homography::operator*(const Homography& rhs) const { return Homography(h_ * rhs.h_); }

namespace {

// Similarity taking the centroid to the origin and the mean distance to sqrt(2).
Eigen::Matrix3d normalizer(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  if (!(d > 0.0)) throw DegenerateError("homography: all points coincide");
  const double s = std::sqrt(2.0) / d;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

Vec2 xform(const Eigen::Matrix3d& t, const Vec2& p) {
  return {t(0, 0) * p.x() + t(0, 2), t(1, 1) * p.y() + t(1, 2)};
}

bool has_collinear_triple(const std::vector<Vec2>& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      for (std::size_t k = j + 1; k < p.size(); ++k) {
        const Vec2 u = p[j] - p[i], v = p[k] - p[i];
        if (std::abs(u.x() * v.y() - u.y() * v.x()) < 1e-9) return true;
      }
  return false;
}

}  // namespace

Homography estimate_homography(std::span<const Vec2> src, std::span<const Vec2> dst) {
  if (src.size() != dst.size()) throw DataError("homography: point lists differ in length");
  if (src.size() < 4) throw DegenerateError("homography needs at least 4 point pairs");

  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  std::vector<Vec2> s(src.size()), d(dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    s[i] = xform(ts, src[i]);
    d[i] = xform(td, dst[i]);
  }
  if (src.size() == 4 && (has_collinear_triple(s) || has_collinear_triple(d)))
    throw DegenerateError("homography: three collinear points in a minimal set");

  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = s[i].x(), y = s[i].y(), u = d[i].x(), v = d[i].y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A unique solution needs an 8-dimensional row space.
  if (sv.size() < 8 || sv[7] <= 1e-10 * sv[0])
    throw DegenerateError("homography: rank-deficient correspondence set");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];

  Homography out(td.inverse() * hn * ts);
  double sq = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sq += (out.apply(src[i]) - dst[i]).squaredNorm();
  out.rms_error = std::sqrt(sq / static_cast<double>(src.size()));
  return out;
}

}  // namespace gazekit
