#pragma once

#include "gazekit/image.hpp"
#include "gazekit/types.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace gazekit {

/// Result of the center-surround search: the best kernel position and the
/// square crop (fully inside the frame) handed to the later stages.
struct CoarseRegion {
  Vec2 center = Vec2::Zero();
  int inner_radius = 0;
  int outer_radius = 0;
  double response = 0.0;
  Rect rect;
};

/// Mean surround intensity minus mean center intensity for the kernel with an
/// inner square of half-width r and an outer square of half-width 3r.
double center_surround_response(const IntegralImage& ii, int cx, int cy, int r);

/// Throws DataError("frame too small") when the frame cannot hold the
/// smallest kernel.
CoarseRegion coarse_pupil_region(const GrayFrame& frame, const DetectorParams& params);

/// Binary edge mask placed at `origin` in frame coordinates. Edge pixels also
/// carry a sub-pixel offset of the gradient maximum from the pixel center.
struct EdgeMap {
  Eigen::Vector2i origin = Eigen::Vector2i::Zero();
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  std::vector<Eigen::Vector2f> offset;

  EdgeMap() = default;
  EdgeMap(int w, int h, Eigen::Vector2i origin = Eigen::Vector2i::Zero());

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool on) { mask[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }
  std::size_t count() const;
  /// Sub-pixel position of local pixel (x, y) in frame coordinates.
  Vec2 position(int x, int y) const;
};

/// Canny edge detector: Gaussian smoothing (sigma = canny_auto_sigma), Sobel
/// gradient, non-maximum suppression, hysteresis with thresholds
/// (0.66, 1.33) x median intensity of the input, then thinning to
/// 8-connected single-pixel chains. Isolated pixels are dropped.
EdgeMap canny_edges(const GrayFrame& region, const DetectorParams& params,
                    Eigen::Vector2i origin = Eigen::Vector2i::Zero());

/// Lowest histogram spike intensity plus `offset`, clamped to 255. A spike is a
/// local maximum bin (bin width histogram_bin_width) holding at least
/// histogram_spike_fraction of the pixels; its intensity is the mean of the
/// pixels in that bin.
int dark_threshold(const GrayFrame& region, int offset, int bin_width = 4,
                   double spike_fraction = 0.01);

/// Keeps edge pixels whose filter_window neighborhood contains a pixel <= dark
/// and no pixel >= reflection_saturation. `region` must be the image the
/// edges were computed on.
EdgeMap filter_edges(const EdgeMap& edges, const GrayFrame& region, int dark,
                     const DetectorParams& params);

/// Ordered edge chain. `pixels` are integer frame coordinates, `points` the
/// matching sub-pixel positions.
struct Contour {
  std::vector<Eigen::Vector2i> pixels;
  std::vector<Vec2> points;

  std::size_t size() const noexcept { return points.size(); }
  /// Polyline length over the sub-pixel points.
  double length() const;
};

/// One contour per 8-connected component, pixels ordered by a depth-first walk
/// from an end point. Branching components produce non-adjacent steps at the
/// backtrack points; split_contours cuts there. Isolated pixels are skipped.
std::vector<Contour> extract_contours(const EdgeMap& edges);

/// Turn angle in degrees at every point, measured between the chords to the
/// points `chord` steps before and after. Points closer than `chord` to an
/// end get 0.
std::vector<double> turn_angles(const Contour& contour, int chord);

/// Cuts contours at non-adjacent steps and removes every point whose turn
/// angle exceeds curvature_split_angle. Point order is preserved; pieces
/// shorter than 2 points are dropped.
std::vector<Contour> split_contours(const std::vector<Contour>& contours,
                                    const DetectorParams& params);

struct CandidateFit {
  Ellipse ellipse;
  std::vector<int> support;  // indices into the sub-contour list, ascending
  double support_length = 0.0;
  double fit_residual = 0.0;
  double confidence = 0.0;
};

struct SearchStats {
  int seeds = 0;
  int refits = 0;
  std::vector<CandidateFit> seed_fits;
};

/// Seeds candidates from sub-contours whose own fit is in range, then grows
/// them with a beam search over supporting sub-contours, refitting after each
/// addition. Returns the highest-confidence candidate, or nothing.
std::optional<CandidateFit> combinatorial_search(const std::vector<Contour>& sub_contours,
                                                 const DetectorParams& params,
                                                 SearchStats* stats = nullptr);

/// Intermediate products of one detect() call, for debugging and plots.
struct DetectionTrace {
  CoarseRegion region;
  int dark = 0;
  EdgeMap edges;
  EdgeMap filtered;
  std::vector<Contour> contours;
  std::vector<Contour> sub_contours;
  SearchStats search;
  std::optional<CandidateFit> best;
};

struct Detection {
  std::optional<PupilDatum> pupil;
  /// Confidence of the best candidate, also when it fell below threshold.
  double best_confidence = 0.0;
};

/// Full pipeline on one eye frame. Pure function of (frame, params).
Detection detect(const GrayFrame& frame, const DetectorParams& params,
                 DetectionTrace* trace = nullptr);

}  // namespace gazekit
