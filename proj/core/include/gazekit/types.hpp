#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gazekit {

using Vec2 = Eigen::Vector2d;

enum class StreamId : std::uint8_t { eye, scene };

std::string to_string(StreamId id);

/// Row-major 8-bit grayscale image. Pixel (x, y) has its center at integer
/// coordinates, origin top-left, y pointing down.
class GrayFrame {
 public:
  GrayFrame() = default;
  GrayFrame(int width, int height, std::uint8_t fill = 0, double timestamp = 0.0,
            StreamId stream = StreamId::eye);
  GrayFrame(int width, int height, std::vector<std::uint8_t> pixels, double timestamp = 0.0,
            StreamId stream = StreamId::eye);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  double timestamp() const noexcept { return timestamp_; }
  StreamId stream() const noexcept { return stream_; }
  void set_timestamp(double t) noexcept { timestamp_ = t; }

  std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> row(int y) const {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  double timestamp_ = 0.0;
  StreamId stream_ = StreamId::eye;
};

/// Ellipse in pixel space: semi-axes a >= b > 0, theta is the direction of
/// the major axis in [0, pi).
struct Ellipse {
  Vec2 center = Vec2::Zero();
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;

  /// Point at parametric angle t.
  Vec2 point_at(double t) const;
  bool is_valid() const;

  friend bool operator==(const Ellipse&, const Ellipse&) = default;
};

/// Builds an ellipse from arbitrary axes/angle, swapping and wrapping so the
/// invariants hold.
Ellipse make_ellipse(Vec2 center, double axis0, double axis1, double angle);

struct PupilDatum {
  Ellipse ellipse;
  Vec2 norm_pos = Vec2::Zero();
  double confidence = 0.0;
  double timestamp = 0.0;
};

struct GazeDatum {
  Vec2 norm_pos = Vec2::Zero();
  PupilDatum base;
  double timestamp = 0.0;
  /// Set when norm_pos left the unit square.
  bool out_of_frame = false;
};

struct CameraIntrinsics {
  int width = 1280;
  int height = 720;
  double fov_diagonal = 90.0;  // degrees

  double px_per_degree() const;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool contains(double v) const noexcept { return v >= min && v <= max; }
};

/// Axis-aligned rectangle in integer pixel coordinates, [x, x+width) x [y, y+height).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct DetectorParams {
  Range coarse_radius_range{10.0, 90.0};
  double canny_auto_sigma = 1.0;
  int histogram_offset = 11;
  int reflection_saturation = 250;
  double curvature_split_angle = 60.0;  // degrees
  Range pupil_radius_range{20.0, 120.0};
  double confidence_threshold = 0.3;
  int max_support_combinations = 1000;

  // Tuning knobs with documented defaults.
  std::optional<Rect> roi;
  int histogram_bin_width = 4;
  double histogram_spike_fraction = 0.01;
  int filter_window = 5;
  int curvature_chord = 5;
  double corner_min_angle = 24.0;      // degrees
  double corner_ratio = 2.0;
  int min_subcontour_points = 6;
  double seed_max_residual = 1.5;      // px, RMS Sampson distance
  double support_band = 2.0;           // px
  double support_min_fraction = 0.8;
  int beam_width = 10;
  double min_axis_ratio = 0.3;         // b / a

  /// Throws DataError when a range or threshold is out of bounds.
  void validate() const;
};

/// Normalized coordinates: plain division by frame dims, origin top-left.
Vec2 norm_from_pixel(const Vec2& p, int width, int height);
Vec2 pixel_from_norm(const Vec2& n, int width, int height);

/// sqrt(w^2 + h^2) / fov_diagonal. Throws DataError for fov <= 0.
double px_per_degree(int width, int height, double fov_diagonal);

/// Euclidean pixel distance converted with the linear px/deg approximation.
double angular_distance(const Vec2& p, const Vec2& q, const CameraIntrinsics& intr);

}  // namespace gazekit
