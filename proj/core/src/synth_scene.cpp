#include "gazekit/synth.hpp"

#include "gazekit/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace gazekit {

namespace {

constexpr double kBlack = 0.0;
constexpr double kWhite = 255.0;

// Maps pixel coordinates into marker cell coordinates ([0,7)^2 is the marker).
struct PlacedMarker {
  int id;
  std::array<bool, kMarkerCells * kMarkerCells> cells;
  Eigen::Matrix3d to_cells;
};

struct PlacedSurface {
  Eigen::Matrix3d to_surface;  // scene px -> surface-normalized
  std::vector<PlacedMarker> markers;  // to_cells acts on surface coordinates
};

bool project(const Eigen::Matrix3d& h, double x, double y, Vec2& out) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(x, y, 1.0);
  if (!(q.z() > 1e-12)) return false;
  out = Vec2(q.x() / q.z(), q.y() / q.z());
  return true;
}

std::optional<double> marker_value(const PlacedMarker& m, double x, double y) {
  Vec2 c;
  if (!project(m.to_cells, x, y, c)) return std::nullopt;
  if (c.x() < 0.0 || c.y() < 0.0 || c.x() >= kMarkerCells || c.y() >= kMarkerCells) return std::nullopt;
  const int cx = static_cast<int>(c.x()), cy = static_cast<int>(c.y());
  return m.cells[cy * kMarkerCells + cx] ? kWhite : kBlack;
}

Eigen::Matrix3d cells_to(const MarkerCorners& corners) {
  const std::array<Vec2, 4> cell{Vec2(0, 0), Vec2(kMarkerCells, 0), Vec2(kMarkerCells, kMarkerCells),
                                 Vec2(0, kMarkerCells)};
  return estimate_homography(cell, corners).matrix();
}

// Orients h so that points in front of the mapping get a positive w.
Eigen::Matrix3d positive_w(Eigen::Matrix3d h, const Vec2& inside) {
  const double w = (h * Eigen::Vector3d(inside.x(), inside.y(), 1.0)).z();
  if (w < 0.0) h = -h;
  return h;
}

class SceneModel {
 public:
  explicit SceneModel(const SceneSpec& spec) : spec_(spec) {
    for (const auto& s : spec.surfaces) {
      PlacedSurface ps;
      const Vec2 mid_scene = s.surface_to_scene.apply(Vec2(0.5, 0.5));
      ps.to_surface = positive_w(s.surface_to_scene.inverse().matrix(), mid_scene);
      for (const auto& [id, corners] : s.definition.markers) {
        const Vec2 mid = 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]);
        ps.markers.push_back({id, marker_pattern(id), positive_w(Eigen::Matrix3d(cells_to(corners).inverse()), mid)});
      }
      surfaces_.push_back(std::move(ps));
    }
    for (const auto& f : spec.fiducials) {
      const Vec2 mid = 0.25 * (f.corners[0] + f.corners[1] + f.corners[2] + f.corners[3]);
      fiducials_.push_back({f.id, marker_pattern(f.id), positive_w(Eigen::Matrix3d(cells_to(f.corners).inverse()), mid)});
    }
  }

  double value(double x, double y) const {
    double v = spec_.background;
    for (const auto& s : surfaces_) {
      Vec2 u;
      if (!project(s.to_surface, x, y, u)) continue;
      if (u.x() < 0.0 || u.y() < 0.0 || u.x() > 1.0 || u.y() > 1.0) continue;
      v = kWhite;
      for (const auto& m : s.markers)
        if (auto mv = marker_value(m, u.x(), u.y())) v = *mv;
    }
    for (const auto& m : fiducials_)
      if (auto mv = marker_value(m, x, y)) v = *mv;
    if (spec_.concentric) {
      const auto& c = *spec_.concentric;
      const double r = (Vec2(x, y) - c.center).norm() / c.radius;
      if (r <= 1.0) {
        const bool dark = r > 0.66 || r <= 0.33;
        const bool collect = c.kind == MarkerKind::collect;
        v = (dark == collect) ? kBlack : kWhite;
      }
    }
    return v;
  }

 private:
  const SceneSpec& spec_;
  std::vector<PlacedSurface> surfaces_;
  std::vector<PlacedMarker> fiducials_;
};

}  // namespace

SceneRender render_scene_frame(const SceneSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw DataError("scene dimensions must be positive");
  if (spec.noise_sd < 0.0) throw DataError("scene noise_sd must be >= 0");
  std::set<int> ids;
  for (const auto& f : spec.fiducials) ids.insert(f.id);
  for (const auto& s : spec.surfaces) {
    s.definition.validate();
    for (const auto& m : s.definition.markers) ids.insert(m.first);
  }

  const SceneModel model(spec);
  GrayFrame frame(spec.width, spec.height, 0, spec.timestamp, StreamId::scene);
  std::mt19937_64 rng(spec.noise_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);
  constexpr int kSuper = 4;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v = model.value(x, y);
      // Supersample only where the pixel footprint is not uniform.
      const bool edge = model.value(x - 0.5, y - 0.5) != v || model.value(x + 0.5, y - 0.5) != v ||
                        model.value(x - 0.5, y + 0.5) != v || model.value(x + 0.5, y + 0.5) != v;
      if (edge) {
        v = 0.0;
        for (int sy = 0; sy < kSuper; ++sy)
          for (int sx = 0; sx < kSuper; ++sx)
            v += model.value(x + (sx + 0.5) / kSuper - 0.5, y + (sy + 0.5) / kSuper - 0.5);
        v /= kSuper * kSuper;
      }
      if (spec.noise_sd > 0.0) v += noise(rng);
      frame.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }

  SceneRender out{std::move(frame), {}};
  if (spec.concentric) out.truth.concentric_center = spec.concentric->center;
  for (const auto& f : spec.fiducials) out.truth.markers.push_back({f.id, f.corners});
  for (const auto& s : spec.surfaces) {
    for (const auto& [id, corners] : s.definition.markers) {
      Marker m{id, {}};
      for (int i = 0; i < 4; ++i) m.corners[i] = s.surface_to_scene.apply(corners[i]);
      out.truth.markers.push_back(m);
    }
  }
  std::sort(out.truth.markers.begin(), out.truth.markers.end(),
            [](const Marker& a, const Marker& b) { return a.id < b.id; });
  return out;
}

SurfaceDefinition corner_marker_surface(std::string name, std::array<int, 4> ids, double marker_size) {
  if (!(marker_size > 0.0 && marker_size < 0.45)) throw DataError("marker_size must lie in (0, 0.45)");
  const double inset = 0.04;
  const double lo = inset, hi = 1.0 - inset - marker_size;
  const Vec2 origins[4] = {{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}};
  SurfaceDefinition def;
  def.name = std::move(name);
  for (int i = 0; i < 4; ++i) {
    const Vec2 o = origins[i];
    const MarkerCorners c{o, o + Vec2(marker_size, 0), o + Vec2(marker_size, marker_size), o + Vec2(0, marker_size)};
    if (!def.markers.emplace(ids[i], c).second) throw DataError("surface marker ids must be distinct");
  }
  def.validate();
  return def;
}

SceneRender render_scene_frame(const EyeSceneRig& rig, const Vec2& marker_norm, double t, MarkerKind kind) {
  SceneSpec spec;
  spec.width = rig.scene.width;
  spec.height = rig.scene.height;
  spec.concentric = ConcentricMarkerSpec{pixel_from_norm(marker_norm, spec.width, spec.height),
                                         40.0 * spec.width / 1280.0, kind};
  spec.noise_sd = rig.render.pixel_noise_sd;
  spec.noise_seed = mix_seed(rig.seed, static_cast<std::uint64_t>(std::llround(t * 1e6)) ^ 0x5ce7e5ull);
  spec.timestamp = t;
  return render_scene_frame(spec);
}

}  // namespace gazekit
