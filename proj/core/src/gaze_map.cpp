#include "gazekit/gaze_map.hpp"

#include "gazekit/ellipse.hpp"
#include "gazekit/error.hpp"
#include "gazekit/pupil_detect.hpp"

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace gazekit {

Eigen::VectorXd monomials(const Vec2& p, int degree) {
  Eigen::VectorXd m(monomial_count(degree));
  int k = 0;
  for (int d = 0; d <= degree; ++d)
    for (int i = d; i >= 0; --i) m[k++] = std::pow(p.x(), i) * std::pow(p.y(), d - i);
  return m;
}

Vec2 CalibrationModel::evaluate(const Vec2& pupil) const {
  const Eigen::VectorXd m = monomials(pupil, degree);
  return {coeffs_x.dot(m), coeffs_y.dot(m)};
}

Eigen::Matrix2d CalibrationModel::jacobian(const Vec2& p) const {
  Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
  int k = 0;
  for (int d = 0; d <= degree; ++d) {
    for (int i = d; i >= 0; --i, ++k) {
      const int e = d - i;
      const double dx = i > 0 ? i * std::pow(p.x(), i - 1) * std::pow(p.y(), e) : 0.0;
      const double dy = e > 0 ? e * std::pow(p.x(), i) * std::pow(p.y(), e - 1) : 0.0;
      j(0, 0) += coeffs_x[k] * dx;
      j(0, 1) += coeffs_x[k] * dy;
      j(1, 0) += coeffs_y[k] * dx;
      j(1, 1) += coeffs_y[k] * dy;
    }
  }
  return j;
}

double CalibrationModel::lipschitz_bound() const {
  // On [0,1]^2 the gradient of x^i y^j is bounded by sqrt(i^2 + j^2); the
  // Jacobian's spectral norm is bounded by its Frobenius norm.
  double lx = 0.0, ly = 0.0;
  int k = 0;
  for (int d = 0; d <= degree; ++d) {
    for (int i = d; i >= 0; --i, ++k) {
      const double g = std::hypot(i, d - i);
      lx += std::abs(coeffs_x[k]) * g;
      ly += std::abs(coeffs_y[k]) * g;
    }
  }
  return std::hypot(lx, ly);
}

void CalibrationModel::validate() const {
  if (degree < 1) throw DataError("calibration degree must be >= 1");
  const auto n = monomial_count(degree);
  if (coeffs_x.size() != n || coeffs_y.size() != n)
    throw DataError("calibration model needs " + std::to_string(n) + " coefficients per axis");
  if (!coeffs_x.allFinite() || !coeffs_y.allFinite())
    throw DataError("calibration coefficients must be finite");
  if (!(rms_residual >= 0.0)) throw DataError("calibration rms_residual must be >= 0");
}

CalibrationModel CalibrationModel::identity() {
  CalibrationModel m;
  m.degree = 1;
  m.coeffs_x = Eigen::Vector3d(0.0, 1.0, 0.0);
  m.coeffs_y = Eigen::Vector3d(0.0, 0.0, 1.0);
  return m;
}

CalibrationModel calibrate(std::span<const CalibrationPair> pairs, int degree) {
  if (degree < 1) throw DataError("calibration degree must be >= 1");
  const int m = monomial_count(degree);
  const auto n = static_cast<int>(pairs.size());
  if (n < m)
    throw DataError("degree " + std::to_string(degree) + " calibration needs at least " +
                    std::to_string(m) + " pairs, got " + std::to_string(n));

  Eigen::MatrixXd a(n, m);
  Eigen::MatrixXd rhs(n, 2);
  for (int r = 0; r < n; ++r) {
    const auto& p = pairs[r];
    if (!p.pupil.allFinite() || !p.target.allFinite())
      throw DataError("calibration pair " + std::to_string(r) + " is not finite");
    a.row(r) = monomials(p.pupil, degree).transpose();
    rhs(r, 0) = p.target.x();
    rhs(r, 1) = p.target.y();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) throw DegenerateError("degenerate calibration geometry");
  const Eigen::MatrixXd coeffs = qr.solve(rhs);

  CalibrationModel model;
  model.degree = degree;
  model.coeffs_x = coeffs.col(0);
  model.coeffs_y = coeffs.col(1);
  const Eigen::MatrixXd resid = a * coeffs - rhs;
  model.rms_residual = std::sqrt(resid.squaredNorm() / n);
  return model;
}

GazeDatum map_gaze(const PupilDatum& p, const CalibrationModel& model) {
  GazeDatum g;
  g.base = p;
  g.timestamp = p.timestamp;
  g.norm_pos = model.evaluate(p.norm_pos);
  g.out_of_frame = !(g.norm_pos.x() >= 0.0 && g.norm_pos.x() <= 1.0 && g.norm_pos.y() >= 0.0 &&
                     g.norm_pos.y() <= 1.0);
  return g;
}

std::string to_json(const CalibrationModel& model, int indent) {
  nlohmann::json j;
  j["degree"] = model.degree;
  j["coeffs_x"] = std::vector<double>(model.coeffs_x.data(), model.coeffs_x.data() + model.coeffs_x.size());
  j["coeffs_y"] = std::vector<double>(model.coeffs_y.data(), model.coeffs_y.data() + model.coeffs_y.size());
  j["rms_residual"] = model.rms_residual;
  return j.dump(indent);
}

CalibrationModel calibration_from_json(const std::string& text) {
  CalibrationModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.degree = j.at("degree").get<int>();
    const auto cx = j.at("coeffs_x").get<std::vector<double>>();
    const auto cy = j.at("coeffs_y").get<std::vector<double>>();
    m.coeffs_x = Eigen::Map<const Eigen::VectorXd>(cx.data(), static_cast<Eigen::Index>(cx.size()));
    m.coeffs_y = Eigen::Map<const Eigen::VectorXd>(cy.data(), static_cast<Eigen::Index>(cy.size()));
    m.rms_residual = j.value("rms_residual", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("calibration JSON: ") + e.what());
  }
  m.validate();
  return m;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_calibration(const std::filesystem::path& path, const CalibrationModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << to_json(model) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

CalibrationModel load_calibration(const std::filesystem::path& path) {
  return calibration_from_json(slurp(path));
}

std::vector<MarkerSite> nine_point_schedule(double start, double dwell, double margin) {
  if (!(dwell > 0.0)) throw DataError("marker dwell must be positive");
  if (!(margin >= 0.0 && margin < 0.5)) throw DataError("schedule margin must lie in [0, 0.5)");
  const double lo = margin, mid = 0.5, hi = 1.0 - margin;
  // Center first, then clockwise from the top-left corner.
  const Vec2 grid[9] = {{mid, mid}, {lo, lo}, {mid, lo}, {hi, lo}, {hi, mid},
                        {hi, hi},   {mid, hi}, {lo, hi}, {lo, mid}};
  std::vector<MarkerSite> sites;
  for (int i = 0; i < 9; ++i)
    sites.push_back({i, grid[i], start + i * dwell, start + (i + 1) * dwell});
  return sites;
}

std::vector<CalibrationPair> screen_marker_session(std::span<const MarkerSite> sites,
                                                   std::span<const PupilDatum> pupils,
                                                   std::span<const MarkerObservation> markers,
                                                   const ScreenMarkerOptions& options) {
  // Marker observations inside a site's dwell, after the settle window.
  std::vector<double> marker_ts;
  std::vector<std::size_t> marker_idx;
  std::vector<std::size_t> marker_site;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const double t = markers[i].timestamp;
    for (std::size_t s = 0; s < sites.size(); ++s) {
      if (t >= sites[s].start + options.settle && t < sites[s].end) {
        marker_ts.push_back(t);
        marker_idx.push_back(i);
        marker_site.push_back(s);
        break;
      }
    }
  }
  std::vector<double> pupil_ts(pupils.size());
  for (std::size_t i = 0; i < pupils.size(); ++i) pupil_ts[i] = pupils[i].timestamp;
  if (!std::is_sorted(pupil_ts.begin(), pupil_ts.end()) || !std::is_sorted(marker_ts.begin(), marker_ts.end()))
    throw DataError("screen marker session: streams must be sorted by timestamp");

  std::vector<CalibrationPair> out;
  std::vector<int> per_site(sites.size(), 0);
  for (const auto& ip : pair_by_time(pupil_ts, marker_ts, options.max_gap)) {
    const PupilDatum& p = pupils[ip.a];
    if (p.confidence < options.min_confidence) continue;
    const MarkerObservation& m = markers[marker_idx[ip.b]];
    out.push_back({p.norm_pos, m.norm_pos, m.timestamp});
    ++per_site[marker_site[ip.b]];
  }

  std::string missing;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    if (per_site[s] > 0) continue;
    if (!missing.empty()) missing += ", ";
    missing += std::to_string(sites[s].index);
  }
  if (!missing.empty()) throw DataError("no usable calibration pairs for site(s) " + missing);
  return out;
}

// ---------------------------------------------------------------------------
// Concentric marker detection.

namespace {

struct Ring {
  Ellipse e;
  double support = 0.0;
};

double mean_in_disk(const GrayFrame& f, const Vec2& c, double r0, double r1) {
  double sum = 0.0;
  int n = 0;
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - r1)));
  const int x1 = std::min(f.width() - 1, static_cast<int>(std::ceil(c.x() + r1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - r1)));
  const int y1 = std::min(f.height() - 1, static_cast<int>(std::ceil(c.y() + r1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = (Vec2(x, y) - c).norm();
      if (d < r0 || d > r1) continue;
      sum += f.at(x, y);
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace

std::optional<ConcentricMarker> detect_concentric_marker(const GrayFrame& frame) {
  DetectorParams params;
  const EdgeMap edges = canny_edges(frame, params);
  const auto subs = split_contours(extract_contours(edges), params);

  std::vector<Ring> rings;
  for (const auto& c : subs) {
    if (c.size() < 12) continue;
    Ellipse e;
    try {
      e = fit_ellipse(c.points);
    } catch (const DegenerateError&) {
      continue;
    }
    if (e.a < 3.0 || e.b < 0.5 * e.a) continue;
    if (rms_residual(e, c.points) > 1.0) continue;
    const double support = c.length() / circumference(e);
    if (support < 0.3) continue;
    rings.push_back({e, std::min(1.0, support)});
  }
  if (rings.empty()) return std::nullopt;

  // Group rings by center; a marker needs at least two rings of clearly
  // different size around one center.
  std::optional<ConcentricMarker> best;
  double best_score = 0.0;
  std::vector<bool> used(rings.size(), false);
  for (std::size_t i = 0; i < rings.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> group;
    for (std::size_t j = 0; j < rings.size(); ++j) {
      const double tol = std::max(2.0, 0.1 * std::min(rings[i].e.a, rings[j].e.a));
      if (!used[j] && (rings[j].e.center - rings[i].e.center).norm() <= tol) group.push_back(j);
    }
    std::vector<double> radii;
    for (auto j : group) radii.push_back(rings[j].e.a);
    std::sort(radii.begin(), radii.end());
    int distinct = radii.empty() ? 0 : 1;
    for (std::size_t k = 1; k < radii.size(); ++k)
      if (radii[k] > 1.2 * radii[k - 1]) ++distinct;
    if (distinct < 2) continue;
    for (auto j : group) used[j] = true;

    double wsum = 0.0, score = 0.0;
    Vec2 center = Vec2::Zero();
    for (auto j : group) {
      center += rings[j].support * rings[j].e.center;
      wsum += rings[j].support;
      score += rings[j].support;
    }
    center /= wsum;
    if (score <= best_score) continue;

    // Polarity: the innermost disk against the annulus around it.
    const double r_in = radii.front();
    const double inner = mean_in_disk(frame, center, 0.0, 0.6 * r_in);
    const double ring = mean_in_disk(frame, center, 1.25 * r_in, 1.75 * r_in);
    ConcentricMarker m;
    m.center = center;
    m.kind = inner < ring ? MarkerKind::collect : MarkerKind::stop;
    m.rings = distinct;
    best = m;
    best_score = score;
  }
  return best;
}

}  // namespace gazekit
