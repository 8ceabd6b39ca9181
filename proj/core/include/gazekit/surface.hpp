#pragma once

#include "gazekit/homography.hpp"
#include "gazekit/types.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gazekit {

inline constexpr int kMarkerIdCount = 64;
/// Cells per marker side: one black border cell around a 5x5 payload.
inline constexpr int kMarkerCells = 7;

using MarkerCorners = std::array<Vec2, 4>;

/// Square fiducial. Corners run clockwise from the payload's top-left, the
/// corner next to the white orientation cell.
struct Marker {
  int id = 0;
  MarkerCorners corners{};
};

/// 7x7 cell pattern, row-major, true = white. Cells are:
///  - the outer ring: black;
///  - payload corners: top-left white, the other three black (orientation);
///  - the remaining 21 payload cells: 6 id bits and an even-parity bit, each
///    repeated three times.
/// Throws DataError for ids outside [0, 64).
std::array<bool, kMarkerCells * kMarkerCells> marker_pattern(int id);

/// Decodes a sampled 7x7 cell grid (true = white) in any of four rotations.
/// On success returns the id and the number of clockwise quarter turns that
/// bring the sampled grid to the canonical pattern.
struct MarkerDecode {
  int id = 0;
  int rotation = 0;
};
std::optional<MarkerDecode> decode_marker_cells(const std::array<bool, kMarkerCells * kMarkerCells>& cells);

/// Finds square fiducials: Canny edges and contours, convex quadrilateral
/// test, line-fit corner refinement, payload sampled under the rectifying
/// homography.
std::vector<Marker> detect_markers(const GrayFrame& frame);

struct SurfaceDefinition {
  std::string name;
  /// Marker id -> its corners in surface-normalized [0,1]^2 coordinates, in
  /// the same order as Marker::corners.
  std::map<int, MarkerCorners> markers;

  void validate() const;
};

std::string to_json(const SurfaceDefinition& def, int indent = 2);
SurfaceDefinition surface_from_json(const std::string& text);
SurfaceDefinition load_surface(const std::filesystem::path& path);
void save_surface(const std::filesystem::path& path, const SurfaceDefinition& def);

/// Homography from scene-normalized to surface-normalized coordinates, from
/// all visible markers that belong to the surface. Empty when fewer than one
/// marker is visible.
std::optional<Homography> locate_surface(const SurfaceDefinition& def,
                                         const std::vector<Marker>& markers,
                                         const CameraIntrinsics& scene);

struct SurfaceGaze {
  Vec2 norm_pos = Vec2::Zero();    // surface-normalized
  Vec2 scene_px = Vec2::Zero();    // gaze point in scene pixels
  bool on_surface = false;
  double timestamp = 0.0;
};

/// H maps scene-normalized coordinates to surface-normalized coordinates.
/// Throws DegenerateError("degenerate projection") at the line at infinity.
SurfaceGaze map_gaze_to_surface(const GazeDatum& gaze, const Homography& scene_to_surface,
                                const CameraIntrinsics& scene);

}  // namespace gazekit
