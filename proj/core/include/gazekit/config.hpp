#pragma once

#include "gazekit/types.hpp"

#include <filesystem>
#include <string>

namespace gazekit {

struct IoConfig {
  std::string dataset_dir;
  std::string output_dir;
  std::string bind = "127.0.0.1:50020";
};

/// Everything the CLI reads from its JSON config. Every field is optional in
/// the file and falls back to the defaults below.
///
///   {
///     "detector": { "coarse_radius_range": [10, 90], "canny_sigma": 1.0,
///                   "histogram_offset": 11, "reflection_saturation": 250,
///                   "curvature_split_angle": 60, "pupil_radius_range": [20, 120],
///                   "confidence_threshold": 0.3, "max_support_combinations": 1000,
///                   "roi": [x, y, width, height] },
///     "eye_camera":   { "width": 640,  "height": 480, "fov_diagonal": 90 },
///     "scene_camera": { "width": 1280, "height": 720, "fov_diagonal": 90 },
///     "calibration":  { "degree": 2 },
///     "io": { "dataset_dir": "", "output_dir": "", "bind": "127.0.0.1:50020" }
///   }
struct Config {
  DetectorParams detector;
  CameraIntrinsics eye_camera{640, 480, 90.0};
  CameraIntrinsics scene_camera{1280, 720, 90.0};
  int calibration_degree = 2;
  IoConfig io;

  void validate() const;
};

/// Unknown keys are rejected so that typos do not silently fall back to defaults.
Config config_from_json(const std::string& text);
std::string to_json(const Config& config, int indent = 2);
Config load_config(const std::filesystem::path& path);

}  // namespace gazekit
