#include "gazekit/synth.hpp"

#include "gazekit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>

namespace gazekit {

namespace {

constexpr double kAaMargin = 1.5;
constexpr int kSuper = 4;

struct EyeScene {
  const EyeFrameSpec& spec;
  double cos_t, sin_t;
  double iris_radius;
  double eyelid_y;  // rows above this line are eyelid

  explicit EyeScene(const EyeFrameSpec& s) : spec(s) {
    const Ellipse& e = s.pupil;
    cos_t = std::cos(e.theta);
    sin_t = std::sin(e.theta);
    iris_radius = s.appearance.iris_scale * e.a;
    const double half_h = std::sqrt(e.a * e.a * sin_t * sin_t + e.b * e.b * cos_t * cos_t);
    eyelid_y = s.occlusion > 0.0 ? e.center.y() - half_h + 2.0 * half_h * s.occlusion
                                 : -std::numeric_limits<double>::infinity();
  }

  // Normalized elliptic radius: 1 on the pupil boundary.
  double pupil_rho(double x, double y) const {
    const double dx = x - spec.pupil.center.x(), dy = y - spec.pupil.center.y();
    const double u = cos_t * dx + sin_t * dy;
    const double v = -sin_t * dx + cos_t * dy;
    return std::sqrt(u * u / (spec.pupil.a * spec.pupil.a) + v * v / (spec.pupil.b * spec.pupil.b));
  }

  double value(double x, double y) const {
    const auto& ap = spec.appearance;
    if (y < eyelid_y) return ap.eyelid;
    for (const auto& g : spec.glints)
      if ((Vec2(x, y) - g.center).squaredNorm() <= g.radius * g.radius) return ap.glint;
    if (pupil_rho(x, y) <= 1.0) return ap.pupil;
    const double r = (Vec2(x, y) - spec.pupil.center).norm();
    if (r <= iris_radius) return ap.iris_inner + (ap.iris_outer - ap.iris_inner) * r / iris_radius;
    return ap.sclera;
  }

  // True when some region boundary passes within kAaMargin of (x, y).
  bool near_boundary(double x, double y) const {
    if (std::abs(y - eyelid_y) < kAaMargin) return true;
    for (const auto& g : spec.glints)
      if (std::abs((Vec2(x, y) - g.center).norm() - g.radius) < kAaMargin) return true;
    // The distance to the ellipse is at least |rho - 1| * b.
    if (std::abs(pupil_rho(x, y) - 1.0) * spec.pupil.b < kAaMargin) return true;
    if (std::abs((Vec2(x, y) - spec.pupil.center).norm() - iris_radius) < kAaMargin) return true;
    return false;
  }
};

}  // namespace

EyeRender render_eye_frame(const EyeFrameSpec& spec) {
  if (!spec.pupil.is_valid()) throw DataError("render_eye_frame: invalid pupil ellipse");
  if (!(spec.occlusion >= 0.0 && spec.occlusion < 1.0))
    throw DataError("render_eye_frame: occlusion must lie in [0, 1)");
  if (spec.noise_sd < 0.0) throw DataError("render_eye_frame: noise_sd must be >= 0");

  const EyeScene scene(spec);
  GrayFrame frame(spec.width, spec.height, 0, spec.timestamp, StreamId::eye);
  std::mt19937_64 rng(spec.noise_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v;
      if (scene.near_boundary(x, y)) {
        v = 0.0;
        for (int sy = 0; sy < kSuper; ++sy)
          for (int sx = 0; sx < kSuper; ++sx)
            v += scene.value(x + (sx + 0.5) / kSuper - 0.5, y + (sy + 0.5) / kSuper - 0.5);
        v /= kSuper * kSuper;
      } else {
        v = scene.value(x, y);
      }
      // Saturated sensor pixels stay saturated.
      if (spec.noise_sd > 0.0 && v < 254.0) v += noise(rng);
      frame.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return {std::move(frame), spec.pupil};
}

Ellipse foreshortened_pupil(const Vec2& center, double radius, const Vec2& offset_px,
                            double eye_px_per_degree) {
  const double deg = offset_px.norm() / eye_px_per_degree;
  const double minor = radius * std::cos(std::min(deg, 80.0) * std::numbers::pi / 180.0);
  const double dir = std::atan2(offset_px.y(), offset_px.x());
  return make_ellipse(center, radius, minor, dir + std::numbers::pi / 2.0);
}

}  // namespace gazekit
