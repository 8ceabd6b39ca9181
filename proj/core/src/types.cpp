#include "gazekit/types.hpp"

#include "gazekit/error.hpp"

#include <cmath>
#include <numbers>

namespace gazekit {

std::string to_string(StreamId id) { return id == StreamId::eye ? "eye" : "scene"; }

GrayFrame::GrayFrame(int width, int height, std::uint8_t fill, double timestamp, StreamId stream)
    : width_(width), height_(height), timestamp_(timestamp), stream_(stream) {
  if (width <= 0 || height <= 0) throw DataError("frame dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayFrame::GrayFrame(int width, int height, std::vector<std::uint8_t> pixels, double timestamp,
                     StreamId stream)
    : width_(width), height_(height), pixels_(std::move(pixels)), timestamp_(timestamp),
      stream_(stream) {
  if (width <= 0 || height <= 0) throw DataError("frame dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw DataError("pixel buffer size does not match frame dimensions");
}

Vec2 Ellipse::point_at(double t) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double u = a * std::cos(t), v = b * std::sin(t);
  return center + Vec2(c * u - s * v, s * u + c * v);
}

bool Ellipse::is_valid() const {
  return std::isfinite(center.x()) && std::isfinite(center.y()) && std::isfinite(a) &&
         std::isfinite(b) && a >= b && b > 0.0 && theta >= 0.0 && theta < std::numbers::pi;
}

Ellipse make_ellipse(Vec2 center, double axis0, double axis1, double angle) {
  Ellipse e;
  e.center = center;
  if (axis1 > axis0) {
    std::swap(axis0, axis1);
    angle += std::numbers::pi / 2.0;
  }
  e.a = axis0;
  e.b = axis1;
  angle = std::fmod(angle, std::numbers::pi);
  if (angle < 0.0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle = 0.0;
  e.theta = angle;
  return e;
}

double CameraIntrinsics::px_per_degree() const {
  return gazekit::px_per_degree(width, height, fov_diagonal);
}

void DetectorParams::validate() const {
  auto check_range = [](const Range& r, const char* name) {
    if (!(r.min < r.max) || r.min <= 0.0)
      throw DataError(std::string(name) + ": expected 0 < min < max");
  };
  check_range(coarse_radius_range, "coarse_radius_range");
  check_range(pupil_radius_range, "pupil_radius_range");
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0))
    throw DataError("confidence_threshold must lie in (0, 1)");
  if (canny_auto_sigma <= 0.0) throw DataError("canny_auto_sigma must be positive");
  if (histogram_offset < 0) throw DataError("histogram_offset must be >= 0");
  if (histogram_bin_width < 1) throw DataError("histogram_bin_width must be >= 1");
  if (filter_window < 1 || filter_window % 2 == 0)
    throw DataError("filter_window must be a positive odd number");
  if (curvature_chord < 1) throw DataError("curvature_chord must be >= 1");
  if (max_support_combinations < 1) throw DataError("max_support_combinations must be >= 1");
  if (beam_width < 1) throw DataError("beam_width must be >= 1");
  if (min_subcontour_points < 5) throw DataError("min_subcontour_points must be >= 5");
}

Vec2 norm_from_pixel(const Vec2& p, int width, int height) {
  return {p.x() / width, p.y() / height};
}

Vec2 pixel_from_norm(const Vec2& n, int width, int height) {
  return {n.x() * width, n.y() * height};
}

double px_per_degree(int width, int height, double fov_diagonal) {
  if (!(fov_diagonal > 0.0)) throw DataError("field of view must be positive");
  const double w = width, h = height;
  return std::sqrt(w * w + h * h) / fov_diagonal;
}

double angular_distance(const Vec2& p, const Vec2& q, const CameraIntrinsics& intr) {
  return (p - q).norm() / intr.px_per_degree();
}

}  // namespace gazekit
