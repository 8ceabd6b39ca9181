#include "gazekit/synth.hpp"

#include "gazekit/error.hpp"
#include "gazekit/recording.hpp"

#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace gazekit {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Rig

EyeSceneRig EyeSceneRig::standard(std::uint64_t seed) {
  EyeSceneRig rig;
  rig.seed = seed;
  // Linear part from the two angular scales; the eye camera mirrors x.
  const double kx = (rig.scene.px_per_degree() / rig.scene.width) / (rig.eye_px_per_degree / rig.eye.width);
  const double ky = (rig.scene.px_per_degree() / rig.scene.height) / (rig.eye_px_per_degree / rig.eye.height);
  const Vec2 c = rig.eye_axis_norm;
  auto truth = [&](const Vec2& p) {
    const double dx = p.x() - c.x(), dy = p.y() - c.y();
    return Vec2(0.5 - kx * dx + 0.3 * dx * dy + 0.25 * dx * dx,
                0.5 + ky * dy + 0.35 * dx * dx - 0.2 * dy * dy);
  };
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const Vec2 p(0.1 + 0.2 * i, 0.1 + 0.2 * j);
      pairs.push_back({p, truth(p), 0.0});
    }
  rig.gaze_truth = calibrate(pairs, 2);
  rig.gaze_truth.rms_residual = 0.0;
  return rig;
}

Vec2 EyeSceneRig::pupil_for_target(const Vec2& target) const {
  // Off-frame targets land on spurious branches of the polynomial.
  if (!(target.x() >= 0.0 && target.x() <= 1.0 && target.y() >= 0.0 && target.y() <= 1.0))
    throw DataError("gaze target lies outside the scene frame");
  const Eigen::Matrix2d j0 = gaze_truth.jacobian(eye_axis_norm);
  Vec2 p = eye_axis_norm + j0.inverse() * (target - gaze_truth.evaluate(eye_axis_norm));
  for (int it = 0; it < 60; ++it) {
    const Vec2 r = gaze_truth.evaluate(p) - target;
    if (r.norm() < 1e-14) break;
    const Eigen::Matrix2d j = gaze_truth.jacobian(p);
    if (std::abs(j.determinant()) < 1e-12) break;
    p -= j.inverse() * r;
  }
  if ((gaze_truth.evaluate(p) - target).norm() < 1e-10) return p;
  throw DataError("gaze target is not reachable by the rig's transfer function");
}

Ellipse EyeSceneRig::pupil_ellipse(const Vec2& target) const {
  const Vec2 p = pupil_for_target(target);
  const Vec2 px = pixel_from_norm(p, eye.width, eye.height);
  const Vec2 axis = pixel_from_norm(eye_axis_norm, eye.width, eye.height);
  return foreshortened_pupil(px, pupil_radius, px - axis, eye_px_per_degree);
}

Vec2 EyeSceneRig::path_target(double t) const {
  return {0.5 + path_amplitude.x() * std::sin(2.0 * std::numbers::pi * path_frequency.x() * t),
          0.5 + path_amplitude.y() * std::sin(2.0 * std::numbers::pi * path_frequency.y() * t + 0.7)};
}

void EyeSceneRig::validate() const {
  for (const auto* c : {&eye, &scene})
    if (c->width <= 0 || c->height <= 0 || !(c->fov_diagonal > 0.0))
      throw DataError("rig: invalid camera intrinsics");
  if (!(eye_rate > 0.0) || !(scene_rate > 0.0)) throw DataError("rig: frame rates must be positive");
  eye_clock.validate();
  scene_clock.validate();
  gaze_truth.validate();
  if (!(eye_px_per_degree > 0.0)) throw DataError("rig: eye_px_per_degree must be positive");
  if (!(pupil_radius > 0.0)) throw DataError("rig: pupil_radius must be positive");
  if (!(render.occlusion >= 0.0 && render.occlusion < 1.0)) throw DataError("rig: occlusion must lie in [0, 1)");
  if (render.pixel_noise_sd < 0.0 || render.glint_count < 0 || render.glint_radius <= 0.0)
    throw DataError("rig: invalid render noise");
  const auto& s = session;
  if (s.pupil_noise_px < 0.0 || !(s.pupil_noise_tau > 0.0) || s.oculomotor_noise_deg < 0.0 ||
      s.blink_rate < 0.0 || s.saccade_latency < 0.0)
    throw DataError("rig: invalid session noise");
  if (!(s.blink_duration.min > 0.0 && s.blink_duration.min <= s.blink_duration.max))
    throw DataError("rig: invalid blink duration range");
}

namespace {

json camera_json(const CameraIntrinsics& c) {
  return {{"width", c.width}, {"height", c.height}, {"fov_diagonal", c.fov_diagonal}};
}
CameraIntrinsics camera_from(const json& j) {
  return {j.at("width").get<int>(), j.at("height").get<int>(), j.at("fov_diagonal").get<double>()};
}
json clock_json(const ClockModel& c) {
  return {{"kind", c.kind == ClockKind::hardware ? "hardware" : "software"},
          {"offset", c.offset},
          {"jitter_sd", c.jitter_sd}};
}
ClockModel clock_from(const json& j) {
  ClockModel c;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "hardware") c.kind = ClockKind::hardware;
  else if (kind == "software") c.kind = ClockKind::software;
  else throw DataError("rig: unknown clock kind '" + kind + "'");
  c.offset = j.at("offset").get<double>();
  c.jitter_sd = j.at("jitter_sd").get<double>();
  return c;
}
json vec_json(const Vec2& v) { return {v.x(), v.y()}; }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

std::string to_json(const EyeSceneRig& r, int indent) {
  const auto& a = r.appearance;
  const auto& s = r.session;
  json j{{"seed", r.seed},
         {"eye", camera_json(r.eye)},
         {"scene", camera_json(r.scene)},
         {"eye_rate", r.eye_rate},
         {"scene_rate", r.scene_rate},
         {"eye_clock", clock_json(r.eye_clock)},
         {"scene_clock", clock_json(r.scene_clock)},
         {"eye_px_per_degree", r.eye_px_per_degree},
         {"pupil_radius", r.pupil_radius},
         {"eye_axis_norm", vec_json(r.eye_axis_norm)},
         {"gaze_truth", json::parse(to_json(r.gaze_truth, -1))},
         {"appearance",
          {{"pupil", a.pupil}, {"iris_inner", a.iris_inner}, {"iris_outer", a.iris_outer},
           {"iris_scale", a.iris_scale}, {"sclera", a.sclera}, {"eyelid", a.eyelid}, {"glint", a.glint}}},
         {"render",
          {{"pixel_noise_sd", r.render.pixel_noise_sd}, {"glint_count", r.render.glint_count},
           {"glint_radius", r.render.glint_radius}, {"occlusion", r.render.occlusion}}},
         {"session",
          {{"pupil_noise_px", s.pupil_noise_px}, {"pupil_noise_tau", s.pupil_noise_tau},
           {"oculomotor_noise_deg", s.oculomotor_noise_deg}, {"blink_rate", s.blink_rate},
           {"blink_duration", {s.blink_duration.min, s.blink_duration.max}},
           {"headset_drift", vec_json(s.headset_drift)}, {"saccade_latency", s.saccade_latency}}},
         {"path_amplitude", vec_json(r.path_amplitude)},
         {"path_frequency", vec_json(r.path_frequency)}};
  return j.dump(indent);
}

EyeSceneRig rig_from_json(const std::string& text) {
  EyeSceneRig r = EyeSceneRig::standard();
  try {
    const json j = json::parse(text);
    r.seed = j.value("seed", r.seed);
    if (j.contains("eye")) r.eye = camera_from(j["eye"]);
    if (j.contains("scene")) r.scene = camera_from(j["scene"]);
    r.eye_rate = j.value("eye_rate", r.eye_rate);
    r.scene_rate = j.value("scene_rate", r.scene_rate);
    if (j.contains("eye_clock")) r.eye_clock = clock_from(j["eye_clock"]);
    if (j.contains("scene_clock")) r.scene_clock = clock_from(j["scene_clock"]);
    r.eye_px_per_degree = j.value("eye_px_per_degree", r.eye_px_per_degree);
    r.pupil_radius = j.value("pupil_radius", r.pupil_radius);
    if (j.contains("eye_axis_norm")) r.eye_axis_norm = vec_from(j["eye_axis_norm"]);
    if (j.contains("gaze_truth")) r.gaze_truth = calibration_from_json(j["gaze_truth"].dump());
    if (j.contains("appearance")) {
      const auto& a = j["appearance"];
      auto& o = r.appearance;
      o.pupil = a.value("pupil", o.pupil);
      o.iris_inner = a.value("iris_inner", o.iris_inner);
      o.iris_outer = a.value("iris_outer", o.iris_outer);
      o.iris_scale = a.value("iris_scale", o.iris_scale);
      o.sclera = a.value("sclera", o.sclera);
      o.eyelid = a.value("eyelid", o.eyelid);
      o.glint = a.value("glint", o.glint);
    }
    if (j.contains("render")) {
      const auto& a = j["render"];
      auto& o = r.render;
      o.pixel_noise_sd = a.value("pixel_noise_sd", o.pixel_noise_sd);
      o.glint_count = a.value("glint_count", o.glint_count);
      o.glint_radius = a.value("glint_radius", o.glint_radius);
      o.occlusion = a.value("occlusion", o.occlusion);
    }
    if (j.contains("session")) {
      const auto& a = j["session"];
      auto& o = r.session;
      o.pupil_noise_px = a.value("pupil_noise_px", o.pupil_noise_px);
      o.pupil_noise_tau = a.value("pupil_noise_tau", o.pupil_noise_tau);
      o.oculomotor_noise_deg = a.value("oculomotor_noise_deg", o.oculomotor_noise_deg);
      o.blink_rate = a.value("blink_rate", o.blink_rate);
      if (a.contains("blink_duration")) {
        const auto v = vec_from(a["blink_duration"]);
        o.blink_duration = {v.x(), v.y()};
      }
      if (a.contains("headset_drift")) o.headset_drift = vec_from(a["headset_drift"]);
      o.saccade_latency = a.value("saccade_latency", o.saccade_latency);
    }
    if (j.contains("path_amplitude")) r.path_amplitude = vec_from(j["path_amplitude"]);
    if (j.contains("path_frequency")) r.path_frequency = vec_from(j["path_frequency"]);
  } catch (const json::exception& e) {
    throw DataError(std::string("rig JSON: ") + e.what());
  }
  r.validate();
  return r;
}

EyeRender render_eye_frame(const EyeSceneRig& rig, double t) {
  const auto frame_key = static_cast<std::uint64_t>(std::llround(t * 1e6));
  EyeFrameSpec spec;
  spec.width = rig.eye.width;
  spec.height = rig.eye.height;
  spec.pupil = rig.pupil_ellipse(rig.path_target(t));
  spec.appearance = rig.appearance;
  spec.occlusion = rig.render.occlusion;
  spec.noise_sd = rig.render.pixel_noise_sd;
  spec.noise_seed = mix_seed(rig.seed, frame_key);
  spec.timestamp = t;
  std::mt19937_64 rng(mix_seed(rig.seed ^ 0x61e7ull, frame_key));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int g = 0; g < rig.render.glint_count; ++g) {
    const Vec2 off(u(rng), u(rng));
    spec.glints.push_back({spec.pupil.center + 0.8 * spec.pupil.a * off, rig.render.glint_radius});
  }
  return render_eye_frame(spec);
}

// ---------------------------------------------------------------------------
// Sessions

SimulatedSession simulate_session(const EyeSceneRig& rig, const SessionProtocol& protocol) {
  rig.validate();
  if (!(protocol.calibration_dwell > 0.0) || !(protocol.test_dwell > 0.0) || protocol.random_sites < 0 ||
      protocol.lead_in < 0.0 || protocol.pause < 0.0)
    throw DataError("session protocol: invalid timing");

  SimulatedSession out;
  out.eye = rig.eye;
  out.scene = rig.scene;
  out.calibration_sites = nine_point_schedule(protocol.lead_in, protocol.calibration_dwell);
  const double cal_end = out.calibration_sites.back().end;

  // Independent streams, so toggling one error source leaves the others intact.
  std::mt19937_64 site_rng(mix_seed(rig.seed, 1));
  std::mt19937_64 blink_rng(mix_seed(rig.seed, 2));
  std::mt19937_64 noise_rng(mix_seed(rig.seed, 3));
  std::mt19937_64 eye_clock_rng(mix_seed(rig.seed, 4));
  std::mt19937_64 scene_clock_rng(mix_seed(rig.seed, 5));
  std::mt19937_64 oculo_rng(mix_seed(rig.seed, 6));

  std::vector<Vec2> test_targets;
  std::uniform_real_distribution<double> site_u(0.1, 0.9);
  for (int i = 0; i < protocol.random_sites; ++i) {
    const double x = site_u(site_rng);
    test_targets.emplace_back(x, site_u(site_rng));
  }
  if (protocol.revisit_calibration_sites)
    for (const auto& s : out.calibration_sites) test_targets.push_back(s.target);
  double t0 = cal_end + protocol.pause;
  for (std::size_t i = 0; i < test_targets.size(); ++i) {
    out.test_sites.push_back({static_cast<int>(i), test_targets[i], t0, t0 + protocol.test_dwell});
    t0 += protocol.test_dwell;
  }
  for (int idx : protocol.occluded_sites)
    if (idx < 0 || idx >= static_cast<int>(out.test_sites.size()))
      throw DataError("session protocol: occluded site " + std::to_string(idx) + " does not exist");
  const double end = (out.test_sites.empty() ? cal_end : out.test_sites.back().end) + 0.25;

  std::vector<const MarkerSite*> sites;
  for (const auto& s : out.calibration_sites) sites.push_back(&s);
  for (const auto& s : out.test_sites) sites.push_back(&s);

  std::vector<std::pair<double, double>> blinks;
  const auto& noise = rig.session;
  if (noise.blink_rate > 0.0) {
    std::exponential_distribution<double> gap(noise.blink_rate);
    std::uniform_real_distribution<double> dur(noise.blink_duration.min, noise.blink_duration.max);
    for (double t = gap(blink_rng); t < end; t += gap(blink_rng)) {
      const double d = dur(blink_rng);
      blinks.emplace_back(t, t + d);
      t += d;
    }
  }
  for (const auto& [s, d] : protocol.injected_blinks) {
    if (!(d > 0.0)) throw DataError("session protocol: blink duration must be positive");
    blinks.emplace_back(s, s + d);
  }
  const auto in_blink = [&](double t) {
    return std::any_of(blinks.begin(), blinks.end(), [t](const auto& b) { return t >= b.first && t < b.second; });
  };
  const auto occluded = [&](double t) {
    for (int idx : protocol.occluded_sites) {
      const auto& s = out.test_sites[idx];
      if (t >= s.start && t < s.end) return true;
    }
    return false;
  };
  // Gaze lands on a new site one saccade latency after the marker jumps.
  const auto gaze_target = [&](double t) {
    Vec2 target(0.5, 0.5);
    for (const auto* s : sites)
      if (s->start <= t - noise.saccade_latency) target = s->target;
    return target;
  };

  const double ppd = rig.scene.px_per_degree();
  std::normal_distribution<double> unit(0.0, 1.0);
  const double dt = 1.0 / rig.eye_rate;
  const double rho = std::exp(-dt / noise.pupil_noise_tau);
  const double innov = noise.pupil_noise_px * std::sqrt(1.0 - rho * rho);
  Vec2 ou(noise.pupil_noise_px * unit(noise_rng), noise.pupil_noise_px * unit(noise_rng));

  std::vector<PupilDatum> pupils;
  std::vector<Vec2> truth;
  for (long k = 0;; ++k) {
    const double t = k * dt;
    if (t > end) break;
    if (k > 0) ou = rho * ou + innov * Vec2(unit(noise_rng), unit(noise_rng));
    Vec2 gaze = gaze_target(t);
    if (noise.oculomotor_noise_deg > 0.0) {
      const Vec2 jitter(unit(oculo_rng), unit(oculo_rng));
      gaze += noise.oculomotor_noise_deg * ppd * Vec2(jitter.x() / rig.scene.width, jitter.y() / rig.scene.height);
    }
    const Vec2 pupil_norm = rig.pupil_for_target(gaze);
    Vec2 px = pixel_from_norm(pupil_norm, rig.eye.width, rig.eye.height) + ou +
              noise.headset_drift * std::max(0.0, t - cal_end);
    const Vec2 axis = pixel_from_norm(rig.eye_axis_norm, rig.eye.width, rig.eye.height);

    PupilDatum d;
    d.ellipse = foreshortened_pupil(px, rig.pupil_radius, px - axis, rig.eye_px_per_degree);
    d.norm_pos = norm_from_pixel(px, rig.eye.width, rig.eye.height);
    d.confidence = (in_blink(t) || occluded(t)) ? 0.0 : 1.0;
    d.timestamp = stamp(t, rig.eye_clock, eye_clock_rng);
    pupils.push_back(d);
    truth.push_back(gaze);
  }
  // Jittered software stamps may swap neighbours; streams are kept sorted.
  std::vector<std::size_t> order(pupils.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pupils[a].timestamp < pupils[b].timestamp; });
  for (auto i : order) {
    out.pupils.push_back(pupils[i]);
    out.true_gaze.push_back(truth[i]);
  }

  const double scene_phase = 0.011;
  std::vector<MarkerObservation> markers;
  for (long k = 0;; ++k) {
    const double t = scene_phase + k / rig.scene_rate;
    if (t > end) break;
    const double ts = stamp(t, rig.scene_clock, scene_clock_rng);
    out.scene_timestamps.push_back(ts);
    for (const auto* s : sites)
      if (t >= s->start && t < s->end) markers.push_back({ts, s->target});
  }
  std::sort(out.scene_timestamps.begin(), out.scene_timestamps.end());
  std::stable_sort(markers.begin(), markers.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  out.markers = std::move(markers);
  return out;
}

namespace {

json sites_json(const std::vector<MarkerSite>& sites) {
  json a = json::array();
  for (const auto& s : sites)
    a.push_back({{"index", s.index}, {"target", {s.target.x(), s.target.y()}}, {"start", s.start}, {"end", s.end}});
  return a;
}

std::vector<MarkerSite> sites_from(const json& a) {
  std::vector<MarkerSite> out;
  for (const auto& s : a)
    out.push_back({s.at("index").get<int>(), vec_from(s.at("target")), s.at("start").get<double>(),
                   s.at("end").get<double>()});
  return out;
}

const std::vector<std::string> kPupilHeader{"timestamp", "confidence", "norm_x", "norm_y", "center_x", "center_y",
                                            "a",         "b",          "theta",  "true_gaze_x", "true_gaze_y"};
const std::vector<std::string> kMarkerHeader{"timestamp", "x", "y"};
const std::vector<std::string> kTimestampHeader{"timestamp"};

}  // namespace

void save_session(const std::filesystem::path& dir, const SimulatedSession& s) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  json j{{"eye", camera_json(s.eye)},
         {"scene", camera_json(s.scene)},
         {"calibration_sites", sites_json(s.calibration_sites)},
         {"test_sites", sites_json(s.test_sites)}};
  {
    const auto path = dir / "session.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << j.dump(2) << '\n';
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < s.pupils.size(); ++i) {
    const auto& p = s.pupils[i];
    const Vec2 g = i < s.true_gaze.size() ? s.true_gaze[i] : Vec2(NAN, NAN);
    rows.push_back({p.timestamp, p.confidence, p.norm_pos.x(), p.norm_pos.y(), p.ellipse.center.x(),
                    p.ellipse.center.y(), p.ellipse.a, p.ellipse.b, p.ellipse.theta, g.x(), g.y()});
  }
  write_numeric_csv(dir / "pupil.csv", kPupilHeader, rows);
  rows.clear();
  for (const auto& m : s.markers) rows.push_back({m.timestamp, m.norm_pos.x(), m.norm_pos.y()});
  write_numeric_csv(dir / "markers.csv", kMarkerHeader, rows);
  rows.clear();
  for (double t : s.scene_timestamps) rows.push_back({t});
  write_numeric_csv(dir / "world_timestamps.csv", kTimestampHeader, rows);
}

SimulatedSession load_session(const std::filesystem::path& dir) {
  SimulatedSession s;
  const auto meta_path = dir / "session.json";
  std::ifstream in(meta_path, std::ios::binary);
  if (!in) throw IoError(meta_path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const json j = json::parse(ss.str());
    s.eye = camera_from(j.at("eye"));
    s.scene = camera_from(j.at("scene"));
    s.calibration_sites = sites_from(j.at("calibration_sites"));
    s.test_sites = sites_from(j.at("test_sites"));
  } catch (const json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
  for (const auto& r : read_numeric_csv(dir / "pupil.csv", kPupilHeader).rows) {
    PupilDatum p;
    p.timestamp = r[0];
    p.confidence = r[1];
    p.norm_pos = Vec2(r[2], r[3]);
    p.ellipse = make_ellipse(Vec2(r[4], r[5]), r[6], r[7], r[8]);
    s.pupils.push_back(p);
    s.true_gaze.emplace_back(r[9], r[10]);
  }
  for (const auto& r : read_numeric_csv(dir / "markers.csv", kMarkerHeader).rows)
    s.markers.push_back({r[0], Vec2(r[1], r[2])});
  for (const auto& r : read_numeric_csv(dir / "world_timestamps.csv", kTimestampHeader).rows)
    s.scene_timestamps.push_back(r[0]);
  return s;
}

}  // namespace gazekit
