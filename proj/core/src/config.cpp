#include "gazekit/config.hpp"

#include "gazekit/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gazekit {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw DataError(std::string("config: '") + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw DataError(std::string("config: unknown key '") + k + "' in '" + section + "'");
}

Range range_from(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 2) throw DataError(std::string("config: '") + name + "' must be [min, max]");
  return {j[0].get<double>(), j[1].get<double>()};
}

CameraIntrinsics camera_from(const json& j, const char* section, CameraIntrinsics c) {
  check_keys(j, section, {"width", "height", "fov_diagonal"});
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.fov_diagonal = j.value("fov_diagonal", c.fov_diagonal);
  return c;
}

json camera_json(const CameraIntrinsics& c) {
  return {{"width", c.width}, {"height", c.height}, {"fov_diagonal", c.fov_diagonal}};
}

}  // namespace

void Config::validate() const {
  detector.validate();
  for (const auto* c : {&eye_camera, &scene_camera}) {
    if (c->width <= 0 || c->height <= 0) throw DataError("config: camera dimensions must be positive");
    if (!(c->fov_diagonal > 0.0)) throw DataError("config: camera fov_diagonal must be positive");
  }
  if (calibration_degree < 1) throw DataError("config: calibration degree must be >= 1");
}

Config config_from_json(const std::string& text) {
  Config c;
  try {
    const json j = json::parse(text);
    check_keys(j, "<root>", {"detector", "eye_camera", "scene_camera", "calibration", "io"});
    if (j.contains("detector")) {
      const auto& d = j["detector"];
      check_keys(d, "detector",
                 {"coarse_radius_range", "canny_sigma", "histogram_offset", "reflection_saturation",
                  "curvature_split_angle", "pupil_radius_range", "confidence_threshold",
                  "max_support_combinations", "roi"});
      auto& p = c.detector;
      if (d.contains("coarse_radius_range")) p.coarse_radius_range = range_from(d["coarse_radius_range"], "coarse_radius_range");
      if (d.contains("pupil_radius_range")) p.pupil_radius_range = range_from(d["pupil_radius_range"], "pupil_radius_range");
      p.canny_auto_sigma = d.value("canny_sigma", p.canny_auto_sigma);
      p.histogram_offset = d.value("histogram_offset", p.histogram_offset);
      p.reflection_saturation = d.value("reflection_saturation", p.reflection_saturation);
      p.curvature_split_angle = d.value("curvature_split_angle", p.curvature_split_angle);
      p.confidence_threshold = d.value("confidence_threshold", p.confidence_threshold);
      p.max_support_combinations = d.value("max_support_combinations", p.max_support_combinations);
      if (d.contains("roi") && !d["roi"].is_null()) {
        const auto& r = d["roi"];
        if (!r.is_array() || r.size() != 4) throw DataError("config: 'roi' must be [x, y, width, height]");
        p.roi = Rect{r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()};
      }
    }
    if (j.contains("eye_camera")) c.eye_camera = camera_from(j["eye_camera"], "eye_camera", c.eye_camera);
    if (j.contains("scene_camera")) c.scene_camera = camera_from(j["scene_camera"], "scene_camera", c.scene_camera);
    if (j.contains("calibration")) {
      check_keys(j["calibration"], "calibration", {"degree"});
      c.calibration_degree = j["calibration"].value("degree", c.calibration_degree);
    }
    if (j.contains("io")) {
      const auto& io = j["io"];
      check_keys(io, "io", {"dataset_dir", "output_dir", "bind"});
      c.io.dataset_dir = io.value("dataset_dir", c.io.dataset_dir);
      c.io.output_dir = io.value("output_dir", c.io.output_dir);
      c.io.bind = io.value("bind", c.io.bind);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string to_json(const Config& c, int indent) {
  const auto& p = c.detector;
  json d{{"coarse_radius_range", {p.coarse_radius_range.min, p.coarse_radius_range.max}},
         {"canny_sigma", p.canny_auto_sigma},
         {"histogram_offset", p.histogram_offset},
         {"reflection_saturation", p.reflection_saturation},
         {"curvature_split_angle", p.curvature_split_angle},
         {"pupil_radius_range", {p.pupil_radius_range.min, p.pupil_radius_range.max}},
         {"confidence_threshold", p.confidence_threshold},
         {"max_support_combinations", p.max_support_combinations}};
  d["roi"] = p.roi ? json{p.roi->x, p.roi->y, p.roi->width, p.roi->height} : json(nullptr);
  json j{{"detector", d},
         {"eye_camera", camera_json(c.eye_camera)},
         {"scene_camera", camera_json(c.scene_camera)},
         {"calibration", {{"degree", c.calibration_degree}}},
         {"io", {{"dataset_dir", c.io.dataset_dir}, {"output_dir", c.io.output_dir}, {"bind", c.io.bind}}}};
  return j.dump(indent);
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace gazekit
