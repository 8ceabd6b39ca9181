#include "gazekit/surface.hpp"

#include "gazekit/error.hpp"
#include "gazekit/pupil_detect.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gazekit {

namespace {

constexpr int kN = kMarkerCells;
using Cells = std::array<bool, kN * kN>;

bool is_payload_corner(int x, int y) { return (x == 1 || x == 5) && (y == 1 || y == 5); }
bool is_border(int x, int y) { return x == 0 || y == 0 || x == kN - 1 || y == kN - 1; }

// Data cells in row-major order; cell k carries bit k % 7.
std::vector<int> data_cells() {
  std::vector<int> out;
  for (int y = 1; y < kN - 1; ++y)
    for (int x = 1; x < kN - 1; ++x)
      if (!is_payload_corner(x, y)) out.push_back(y * kN + x);
  return out;
}

Cells rotate_cw(const Cells& in) {
  Cells out{};
  for (int r = 0; r < kN; ++r)
    for (int c = 0; c < kN; ++c) out[r * kN + c] = in[(kN - 1 - c) * kN + r];
  return out;
}

}  // namespace

std::array<bool, kMarkerCells * kMarkerCells> marker_pattern(int id) {
  if (id < 0 || id >= kMarkerIdCount) throw DataError("marker id must lie in [0, 64)");
  Cells cells{};
  cells[1 * kN + 1] = true;  // orientation cell
  const int parity = std::popcount(static_cast<unsigned>(id)) & 1;
  const auto data = data_cells();
  for (std::size_t k = 0; k < data.size(); ++k) {
    const int bit = static_cast<int>(k % 7);
    cells[data[k]] = bit < 6 ? ((id >> bit) & 1) != 0 : parity != 0;
  }
  return cells;
}

std::optional<MarkerDecode> decode_marker_cells(const std::array<bool, kMarkerCells * kMarkerCells>& sampled) {
  static const auto data = data_cells();
  Cells cells = sampled;
  for (int rot = 0; rot < 4; ++rot, cells = rotate_cw(cells)) {
    bool ok = true;
    for (int y = 0; y < kN && ok; ++y)
      for (int x = 0; x < kN && ok; ++x)
        if (is_border(x, y) && cells[y * kN + x]) ok = false;
    if (!ok) continue;
    if (!cells[1 * kN + 1] || cells[1 * kN + 5] || cells[5 * kN + 5] || cells[5 * kN + 1]) continue;
    int votes[7] = {};
    for (std::size_t k = 0; k < data.size(); ++k) votes[k % 7] += cells[data[k]] ? 1 : 0;
    int id = 0;
    for (int bit = 0; bit < 6; ++bit)
      if (votes[bit] >= 2) id |= 1 << bit;
    const int parity = votes[6] >= 2 ? 1 : 0;
    if ((std::popcount(static_cast<unsigned>(id)) & 1) != parity) continue;
    return MarkerDecode{id, rot};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Marker detection.

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// Four extreme hull points, ordered clockwise on screen (y down).
std::optional<std::array<Vec2, 4>> rough_quad(const std::vector<Vec2>& hull) {
  if (hull.size() < 4) return std::nullopt;
  Vec2 c = Vec2::Zero();
  for (const auto& p : hull) c += p;
  c /= static_cast<double>(hull.size());
  auto farthest = [&](auto score) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < hull.size(); ++i)
      if (score(hull[i]) > score(hull[best])) best = i;
    return hull[best];
  };
  const Vec2 p0 = farthest([&](const Vec2& p) { return (p - c).squaredNorm(); });
  const Vec2 p2 = farthest([&](const Vec2& p) { return (p - p0).squaredNorm(); });
  // With y pointing down, a negative cross product is a clockwise turn on screen.
  const Vec2 p1 = farthest([&](const Vec2& p) { return -cross(p0, p2, p); });
  const Vec2 p3 = farthest([&](const Vec2& p) { return cross(p0, p2, p); });
  if (cross(p0, p2, p1) >= 0 || cross(p0, p2, p3) <= 0) return std::nullopt;
  return std::array<Vec2, 4>{p0, p1, p2, p3};
}

struct Line {
  Vec2 point;
  Vec2 dir;
};

std::optional<Line> fit_line(const std::vector<Vec2>& pts) {
  if (pts.size() < 3) return std::nullopt;
  Vec2 m = Vec2::Zero();
  for (const auto& p : pts) m += p;
  m /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - m) * (p - m).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return Line{m, es.eigenvectors().col(1)};
}

std::optional<Vec2> intersect(const Line& a, const Line& b) {
  const double det = a.dir.x() * (-b.dir.y()) - a.dir.y() * (-b.dir.x());
  if (std::abs(det) < 1e-9) return std::nullopt;
  const Vec2 d = b.point - a.point;
  const double t = (d.x() * (-b.dir.y()) - d.y() * (-b.dir.x())) / det;
  return a.point + t * a.dir;
}

double bilinear(const GrayFrame& f, const Vec2& p) {
  const double x = std::clamp(p.x(), 0.0, f.width() - 1.0);
  const double y = std::clamp(p.y(), 0.0, f.height() - 1.0);
  const int x0 = std::min(static_cast<int>(x), f.width() - 2 < 0 ? 0 : f.width() - 2);
  const int y0 = std::min(static_cast<int>(y), f.height() - 2 < 0 ? 0 : f.height() - 2);
  const int x1 = std::min(x0 + 1, f.width() - 1), y1 = std::min(y0 + 1, f.height() - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fx) * (1 - fy) * f.at(x0, y0) + fx * (1 - fy) * f.at(x1, y0) +
         (1 - fx) * fy * f.at(x0, y1) + fx * fy * f.at(x1, y1);
}

std::optional<Marker> read_marker(const GrayFrame& frame, const std::vector<Vec2>& points) {
  const auto hull = convex_hull(points);
  const auto quad = rough_quad(hull);
  if (!quad) return std::nullopt;
  const auto& q = *quad;
  double min_side = 1e300;
  for (int i = 0; i < 4; ++i) min_side = std::min(min_side, (q[(i + 1) % 4] - q[i]).norm());
  if (min_side < 2.0 * kN) return std::nullopt;

  // The chain must trace the quadrilateral outline.
  const double tol = std::max(2.0, 0.04 * min_side);
  std::array<std::vector<Vec2>, 4> side_pts;
  for (const auto& p : points) {
    int best = -1;
    double bd = tol;
    for (int i = 0; i < 4; ++i) {
      const double d = segment_distance(p, q[i], q[(i + 1) % 4]);
      if (d <= bd) {
        bd = d;
        best = i;
      }
    }
    if (best < 0) return std::nullopt;
    // Corner neighbourhoods are rounded by smoothing; leave them out of the line fits.
    const double margin = std::max(3.0, 0.1 * min_side);
    if ((p - q[best]).norm() > margin && (p - q[(best + 1) % 4]).norm() > margin)
      side_pts[best].push_back(p);
  }
  std::array<Line, 4> lines;
  for (int i = 0; i < 4; ++i) {
    const double len = (q[(i + 1) % 4] - q[i]).norm();
    if (static_cast<double>(side_pts[i].size()) < 0.5 * len) return std::nullopt;
    const auto l = fit_line(side_pts[i]);
    if (!l) return std::nullopt;
    lines[i] = *l;
  }
  MarkerCorners corners;
  for (int i = 0; i < 4; ++i) {
    const auto c = intersect(lines[(i + 3) % 4], lines[i]);
    if (!c || (*c - q[i]).norm() > 2.0 * tol) return std::nullopt;
    corners[i] = *c;
  }

  // Sample the cell grid through the rectifying homography.
  const std::array<Vec2, 4> cell_corners{Vec2(0, 0), Vec2(kN, 0), Vec2(kN, kN), Vec2(0, kN)};
  Homography h;
  try {
    h = estimate_homography(cell_corners, corners);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
  std::array<double, kN * kN> mean{};
  for (int cy = 0; cy < kN; ++cy) {
    for (int cx = 0; cx < kN; ++cx) {
      double s = 0.0;
      for (int sy = 0; sy < 3; ++sy)
        for (int sx = 0; sx < 3; ++sx)
          s += bilinear(frame, h.apply(Vec2(cx + 0.3 + 0.2 * sx, cy + 0.3 + 0.2 * sy)));
      mean[cy * kN + cx] = s / 9.0;
    }
  }
  double border = 0.0;
  int nb = 0;
  for (int y = 0; y < kN; ++y)
    for (int x = 0; x < kN; ++x)
      if (is_border(x, y)) {
        border += mean[y * kN + x];
        ++nb;
      }
  border /= nb;
  const double bright = *std::max_element(mean.begin(), mean.end());
  if (bright - border < 40.0) return std::nullopt;
  const double threshold = 0.5 * (border + bright);
  Cells cells{};
  for (int i = 0; i < kN * kN; ++i) cells[i] = mean[i] > threshold;

  const auto dec = decode_marker_cells(cells);
  if (!dec) return std::nullopt;
  Marker m;
  m.id = dec->id;
  for (int i = 0; i < 4; ++i) m.corners[i] = corners[(4 - dec->rotation + i) % 4];
  return m;
}

}  // namespace

std::vector<Marker> detect_markers(const GrayFrame& frame) {
  DetectorParams params;
  const EdgeMap edges = canny_edges(frame, params);
  std::vector<Marker> out;
  for (const auto& c : extract_contours(edges)) {
    if (c.size() < 8 * kN) continue;
    if (auto m = read_marker(frame, c.points)) {
      // The same marker can be read from the inner outline of its border.
      const Vec2 center = 0.25 * (m->corners[0] + m->corners[1] + m->corners[2] + m->corners[3]);
      auto dup = std::find_if(out.begin(), out.end(), [&](const Marker& o) {
        const Vec2 oc = 0.25 * (o.corners[0] + o.corners[1] + o.corners[2] + o.corners[3]);
        return o.id == m->id && (oc - center).norm() < 0.25 * (o.corners[1] - o.corners[0]).norm();
      });
      if (dup == out.end()) {
        out.push_back(*m);
      } else if ((m->corners[1] - m->corners[0]).norm() > (dup->corners[1] - dup->corners[0]).norm()) {
        *dup = *m;  // keep the outer outline
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Marker& a, const Marker& b) {
    if (a.id != b.id) return a.id < b.id;
    return a.corners[0].x() < b.corners[0].x();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Surfaces.

void SurfaceDefinition::validate() const {
  if (markers.empty()) throw DataError("surface '" + name + "' has no markers");
  for (const auto& [id, corners] : markers) {
    if (id < 0 || id >= kMarkerIdCount)
      throw DataError("surface '" + name + "': marker id " + std::to_string(id) + " out of range");
    for (const auto& c : corners)
      if (!c.allFinite()) throw DataError("surface '" + name + "': non-finite marker corner");
  }
}

std::string to_json(const SurfaceDefinition& def, int indent) {
  nlohmann::json j;
  j["name"] = def.name;
  j["markers"] = nlohmann::json::array();
  for (const auto& [id, corners] : def.markers) {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : corners) cs.push_back({c.x(), c.y()});
    j["markers"].push_back({{"id", id}, {"corners", cs}});
  }
  return j.dump(indent);
}

SurfaceDefinition surface_from_json(const std::string& text) {
  SurfaceDefinition def;
  try {
    const auto j = nlohmann::json::parse(text);
    def.name = j.at("name").get<std::string>();
    for (const auto& m : j.at("markers")) {
      const int id = m.at("id").get<int>();
      const auto& cs = m.at("corners");
      if (cs.size() != 4) throw DataError("surface marker needs 4 corners");
      MarkerCorners corners;
      for (int i = 0; i < 4; ++i) corners[i] = Vec2(cs[i].at(0).get<double>(), cs[i].at(1).get<double>());
      if (!def.markers.emplace(id, corners).second)
        throw DataError("surface marker id " + std::to_string(id) + " listed twice");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("surface JSON: ") + e.what());
  }
  def.validate();
  return def;
}

SurfaceDefinition load_surface(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return surface_from_json(ss.str());
}

void save_surface(const std::filesystem::path& path, const SurfaceDefinition& def) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << to_json(def) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

std::optional<Homography> locate_surface(const SurfaceDefinition& def,
                                         const std::vector<Marker>& markers,
                                         const CameraIntrinsics& scene) {
  std::vector<Vec2> src, dst;
  for (const auto& m : markers) {
    const auto it = def.markers.find(m.id);
    if (it == def.markers.end()) continue;
    for (int i = 0; i < 4; ++i) {
      src.push_back(norm_from_pixel(m.corners[i], scene.width, scene.height));
      dst.push_back(it->second[i]);
    }
  }
  if (src.size() < 4) return std::nullopt;
  try {
    return estimate_homography(src, dst);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

SurfaceGaze map_gaze_to_surface(const GazeDatum& gaze, const Homography& scene_to_surface,
                                const CameraIntrinsics& scene) {
  SurfaceGaze s;
  s.timestamp = gaze.timestamp;
  s.scene_px = pixel_from_norm(gaze.norm_pos, scene.width, scene.height);
  s.norm_pos = scene_to_surface.apply(gaze.norm_pos);
  s.on_surface = s.norm_pos.x() >= 0.0 && s.norm_pos.x() <= 1.0 && s.norm_pos.y() >= 0.0 &&
                 s.norm_pos.y() <= 1.0;
  return s;
}

}  // namespace gazekit
