#include "commands.hpp"

#include "gazekit/bus.hpp"
#include "gazekit/error.hpp"
#include "gazekit/eval.hpp"
#include "gazekit/gaze_map.hpp"
#include "gazekit/image.hpp"
#include "gazekit/pipeline.hpp"
#include "gazekit/pupil_detect.hpp"
#include "gazekit/recording.hpp"
#include "gazekit/surface.hpp"
#include "gazekit/synth.hpp"
#include "gazekit/tcp_bridge.hpp"
#include "gazekit/timing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

namespace gazekit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void emit(const Context& ctx, const json& j, const std::string& text) {
  if (ctx.json) std::cout << j.dump(2) << '\n';
  else std::cout << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw IoError(file.parent_path().string(), "cannot create directory: " + ec.message());
  }
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
}

/// frames/*.pgm of a dataset, sorted by name.
std::vector<fs::path> list_frames(const fs::path& dir) {
  require_dir(dir);
  const auto frames_dir = dir / "frames";
  if (!fs::is_directory(frames_dir)) throw IoError(frames_dir.string(), "dataset has no frames/ directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(frames_dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError(frames_dir.string() + ": no .pgm frames");
  return out;
}

/// Frame times: truth.csv of a benchmark, then <stream>_timestamps.csv, then index / rate.
std::vector<double> frame_times(const fs::path& dir, std::size_t n, StreamId stream, double rate) {
  std::vector<double> t;
  if (stream == StreamId::eye && fs::exists(dir / "truth.csv")) {
    for (const auto& row : read_benchmark_truth(dir)) t.push_back(row.timestamp);
  } else if (fs::exists(timestamps_path(dir, stream))) {
    t = read_timestamps(timestamps_path(dir, stream));
  } else {
    for (std::size_t i = 0; i < n; ++i) t.push_back(i / rate);
  }
  if (t.size() != n)
    throw DataError(dir.string() + ": " + std::to_string(t.size()) + " timestamps for " + std::to_string(n) +
                    " frames");
  return t;
}

GrayFrame edge_image(const EdgeMap& e) {
  GrayFrame f(e.width, e.height, 0);
  for (int y = 0; y < e.height; ++y)
    for (int x = 0; x < e.width; ++x)
      if (e.at(x, y)) f.at(x, y) = 255;
  return f;
}

json ellipse_json(const Ellipse& e) {
  return {{"center", {e.center.x(), e.center.y()}}, {"a", e.a}, {"b", e.b}, {"theta", e.theta}};
}

// Per-stage images and candidate record of one frame.
void dump_trace(const fs::path& dir, const std::string& stem, const DetectionTrace& t, const Detection& d) {
  write_pgm(dir / (stem + "_edges.pgm"), edge_image(t.edges));
  write_pgm(dir / (stem + "_filtered.pgm"), edge_image(t.filtered));
  json seeds = json::array();
  for (const auto& c : t.search.seed_fits)
    seeds.push_back({{"ellipse", ellipse_json(c.ellipse)}, {"support", c.support},
                     {"support_length", c.support_length}, {"fit_residual", c.fit_residual},
                     {"confidence", c.confidence}});
  json j{{"region", {{"center", {t.region.center.x(), t.region.center.y()}},
                     {"inner_radius", t.region.inner_radius},
                     {"response", t.region.response},
                     {"rect", {t.region.rect.x, t.region.rect.y, t.region.rect.width, t.region.rect.height}}}},
         {"dark_threshold", t.dark},
         {"edge_pixels", t.edges.count()},
         {"filtered_pixels", t.filtered.count()},
         {"contours", t.contours.size()},
         {"sub_contours", t.sub_contours.size()},
         {"seeds", t.search.seeds},
         {"refits", t.search.refits},
         {"seed_fits", seeds},
         {"best_confidence", d.best_confidence}};
  j["best"] = t.best ? json{{"ellipse", ellipse_json(t.best->ellipse)}, {"support", t.best->support},
                            {"confidence", t.best->confidence}}
                     : json(nullptr);
  write_text(dir / (stem + ".json"), j.dump(2) + "\n");
}

std::vector<PupilDatum> detect_dataset(const fs::path& dir, const DetectorParams& params, int threads,
                                       double rate, double* seconds = nullptr, const fs::path& debug = {}) {
  params.validate();
  const auto frames = list_frames(dir);
  const auto times = frame_times(dir, frames.size(), StreamId::eye, rate);
  if (!debug.empty()) {
    std::error_code ec;
    fs::create_directories(debug, ec);
    if (ec) throw IoError(debug.string(), "cannot create directory: " + ec.message());
  }
  std::vector<PupilDatum> out(frames.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto t0 = std::chrono::steady_clock::now();
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < frames.size(); i = next++) {
        GrayFrame f = read_pgm(frames[i]);
        f.set_timestamp(times[i]);
        DetectionTrace trace;
        const Detection d = detect(f, params, debug.empty() ? nullptr : &trace);
        if (!debug.empty()) dump_trace(debug, frames[i].stem().string(), trace, d);
        out[i] = d.pupil ? *d.pupil : missing_pupil(times[i]);
        out[i].timestamp = times[i];
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = frames.size();
    }
  };
  threads = std::min<int>(resolve_threads(threads), static_cast<int>(frames.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  if (seconds) *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct MapSummary {
  std::size_t rows = 0;
  std::size_t written = 0;
  std::vector<std::string> diagnostics;
};

MapSummary write_gaze(const fs::path& out_dir, const std::vector<PupilDatum>& pupils, const CalibrationModel& model) {
  std::vector<RecordRow> rows;
  std::vector<double> eye_ts;
  const double epoch = pupils.empty() ? 0.0 : pupils.front().timestamp;
  for (const auto& p : pupils) {
    rows.push_back(make_row(map_gaze(p, model), epoch));
    eye_ts.push_back(p.timestamp - epoch);
  }
  const auto s = write_recording(out_dir, rows, eye_ts);
  return {rows.size(), s.written, s.diagnostics};
}

EyeSceneRig load_rig(const std::string& path, std::uint64_t seed, bool seed_given) {
  EyeSceneRig rig = path.empty() ? EyeSceneRig::standard(seed) : rig_from_json(read_text(path));
  if (seed_given) rig.seed = seed;
  return rig;
}

std::string json_line(const json& j) { return j.dump() + '\n'; }

// Scene clip: a corner-marker surface drifting slowly across the scene camera.
void synth_scene(const EyeSceneRig& rig, int frames, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw IoError((dir / "frames").string(), "cannot create directory: " + ec.message());
  const auto surface = corner_marker_surface("desk", {0, 1, 2, 3});
  save_surface(dir / "surface.json", surface);
  const double w = rig.scene.width, h = rig.scene.height;
  const std::vector<Vec2> unit{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<std::vector<double>> truth;
  std::vector<double> stamps;
  for (int i = 0; i < frames; ++i) {
    const double t = i / rig.scene_rate;
    const double s = std::sin(2.0 * std::numbers::pi * 0.2 * t), c = std::cos(2.0 * std::numbers::pi * 0.15 * t);
    const std::vector<Vec2> quad{{(0.25 + 0.03 * s) * w, (0.2 + 0.02 * c) * h},
                                 {(0.75 + 0.02 * c) * w, (0.24 + 0.03 * s) * h},
                                 {(0.78 - 0.02 * s) * w, (0.82 + 0.02 * c) * h},
                                 {(0.22 + 0.02 * c) * w, (0.8 - 0.02 * s) * h}};
    SceneSpec spec;
    spec.width = rig.scene.width;
    spec.height = rig.scene.height;
    const Homography hm = estimate_homography(unit, quad);
    spec.surfaces.push_back({surface, hm});
    spec.noise_sd = rig.render.pixel_noise_sd;
    spec.noise_seed = mix_seed(rig.seed ^ 0x5ce7ull, static_cast<std::uint64_t>(i));
    spec.timestamp = t;
    write_pgm(benchmark_frame_path(dir, i), render_scene_frame(spec).frame);
    std::vector<double> row{double(i), t};
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) row.push_back(hm.matrix()(r, k));
    truth.push_back(row);
    stamps.push_back(t);
  }
  write_numeric_csv(dir / "truth.csv",
                    std::vector<std::string>{"index", "timestamp", "h00", "h01", "h02", "h10", "h11", "h12", "h20",
                                             "h21", "h22"},
                    truth);
  std::vector<std::vector<double>> ts_rows;
  for (double t : stamps) ts_rows.push_back({t});
  write_numeric_csv(timestamps_path(dir, StreamId::scene), std::vector<std::string>{"timestamp"}, ts_rows);
  write_text(dir / "rig.json", to_json(rig) + "\n");
}

std::vector<StageDelay> default_delays(const std::string& pipeline) {
  // Desk-laptop figures; seconds per stage in kStageNames order.
  if (pipeline == "eye") return {{0.0, 0.0}, {0.004, 0.0005}, {0.012, 0.002}, {0.004, 0.001},
                                 {0.018, 0.003}, {0.001, 0.0002}, {0.006, 0.001}};
  return {{0.0, 0.0}, {0.016, 0.001}, {0.035, 0.003}, {0.012, 0.002},
          {0.045, 0.006}, {0.002, 0.0005}, {0.014, 0.002}};
}

}  // namespace

// ---------------------------------------------------------------------------

void add_synth(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("synth", "Generate synthetic eye benchmarks, scene clips or recording sessions");
  struct Opts {
    std::string kind = "benchmark";
    int frames = 500;
    std::uint64_t seed = 0;
    std::string out, rig;
    double pupil_noise = 0.0, pixel_noise = -1.0, oculomotor = 0.0, blink_rate = 0.0;
    std::vector<int> occlude;
    bool software_clocks = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--kind", o->kind, "benchmark | scene | session")
      ->check(CLI::IsMember({"benchmark", "scene", "session"}));
  auto* frames_opt = cmd->add_option("-n,--frames", o->frames, "Frames (benchmark, scene)")->check(CLI::PositiveNumber);
  auto* seed_opt = cmd->add_option("--seed", o->seed, "RNG seed");
  cmd->add_option("-o,--out", o->out, "Output directory")->required();
  cmd->add_option("--rig", o->rig, "Rig JSON (defaults to the standard desk rig)")->check(CLI::ExistingFile);
  cmd->add_option("--pupil-noise", o->pupil_noise, "Session: pupil-center noise sd [eye px]")->check(CLI::NonNegativeNumber);
  cmd->add_option("--pixel-noise", o->pixel_noise, "Render pixel noise sd (overrides the rig)");
  cmd->add_option("--oculomotor", o->oculomotor, "Session: fixational jitter sd [deg]")->check(CLI::NonNegativeNumber);
  cmd->add_option("--blink-rate", o->blink_rate, "Session: blinks per second")->check(CLI::NonNegativeNumber);
  cmd->add_option("--occlude-site", o->occlude, "Session: test site index with confidence 0 (repeatable)");
  cmd->add_flag("--software-clocks", o->software_clocks, "Session: software timestamps on both streams");
  cmd->callback([&ctx, o, seed_opt, frames_opt] {
    ctx.action = [&ctx, o, seed_opt, frames_opt] {
      EyeSceneRig rig = load_rig(o->rig, o->seed, seed_opt->count() > 0);
      if (o->pixel_noise >= 0.0) rig.render.pixel_noise_sd = o->pixel_noise;
      const fs::path out = o->out;
      json summary{{"kind", o->kind}, {"out", out.string()}, {"seed", rig.seed}};
      if (o->kind == "benchmark") {
        generate_benchmark(rig, o->frames, out);
        summary["frames"] = o->frames;
      } else if (o->kind == "scene") {
        const int n = frames_opt->count() ? o->frames : 30;
        synth_scene(rig, n, out);
        summary["frames"] = n;
      } else {
        rig.session.pupil_noise_px = o->pupil_noise;
        rig.session.oculomotor_noise_deg = o->oculomotor;
        rig.session.blink_rate = o->blink_rate;
        if (o->software_clocks) {
          rig.eye_clock = ClockModel::software_eye();
          rig.scene_clock = ClockModel::software_world();
        }
        SessionProtocol protocol;
        protocol.occluded_sites = o->occlude;
        const auto s = simulate_session(rig, protocol);
        save_session(out, s);
        write_text(out / "rig.json", to_json(rig) + "\n");
        summary["pupils"] = s.pupils.size();
        summary["markers"] = s.markers.size();
        summary["scene_frames"] = s.scene_timestamps.size();
      }
      std::string text = "wrote " + o->kind + " to " + out.string();
      if (summary.contains("frames")) text += " (" + std::to_string(summary["frames"].get<int>()) + " frames)";
      emit(ctx, summary, text + "\n");
    };
  });
}

void add_detect(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("detect", "Detect pupils in every frame of a dataset; writes pupil CSV");
  struct Opts {
    std::string dir, out, debug;
    int threads = 0;
    double rate = 60.0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("dataset", o->dir, "Dataset directory with frames/*.pgm")->required();
  cmd->add_option("-o,--out", o->out, "Pupil CSV to write")->required();
  cmd->add_option("--debug", o->debug, "Write per-stage edge images and candidate JSON per frame here");
  cmd->add_option("-j,--threads", o->threads, "Worker threads (0 = logical cores)");
  cmd->add_option("--rate", o->rate, "Frame rate when the dataset has no timestamps")->check(CLI::PositiveNumber);
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      double seconds = 0.0;
      const auto pupils = detect_dataset(o->dir, ctx.config.detector, o->threads, o->rate, &seconds, o->debug);
      ensure_parent(o->out);
      write_pupil_csv(o->out, pupils);
      const auto found = std::count_if(pupils.begin(), pupils.end(), [](const auto& p) { return p.confidence > 0; });
      emit(ctx, {{"frames", pupils.size()}, {"detected", found}, {"out", o->out}},
           std::to_string(found) + "/" + std::to_string(pupils.size()) + " frames with a pupil -> " + o->out + "\n");
      if (ctx.verbosity > 0)
        std::cerr << "detect: " << seconds << " s, " << pupils.size() / std::max(seconds, 1e-9) << " frames/s\n";
    };
  });
}

void add_calibrate(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("calibrate", "Fit the pupil-to-scene polynomial from a screen-marker session");
  struct Opts {
    std::string session, out;
    int degree = 0;
    ScreenMarkerOptions marker;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("-s,--session", o->session, "Session directory")->required();
  cmd->add_option("-o,--out", o->out, "Calibration JSON to write")->required();
  cmd->add_option("--degree", o->degree, "Polynomial degree (default from config)");
  cmd->add_option("--settle", o->marker.settle, "Seconds skipped after each marker jump")->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-confidence", o->marker.min_confidence, "Pupil confidence gate")->check(CLI::Range(0.0, 1.0));
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      const auto s = load_session(o->session);
      const auto pairs = screen_marker_session(s.calibration_sites, s.pupils, s.markers, o->marker);
      const int degree = o->degree > 0 ? o->degree : ctx.config.calibration_degree;
      const auto model = calibrate(pairs, degree);
      ensure_parent(o->out);
      save_calibration(o->out, model);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu pairs, degree %d, rms residual %.3g -> ", pairs.size(), degree,
                    model.rms_residual);
      emit(ctx, {{"pairs", pairs.size()}, {"degree", degree}, {"rms_residual", model.rms_residual}, {"out", o->out}},
           buf + o->out + "\n");
    };
  });
}

void add_map(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("map", "Map a pupil CSV through a calibration into a gaze recording");
  struct Opts {
    std::string pupil, calibration, out;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("-p,--pupil", o->pupil, "Pupil CSV from detect")->required()->check(CLI::ExistingFile);
  cmd->add_option("-k,--calibration", o->calibration, "Calibration JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o->out, "Recording directory (gaze.csv, eye_timestamps.csv)")->required();
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      const auto pupils = read_pupil_csv(o->pupil);
      const auto model = load_calibration(o->calibration);
      const auto s = write_gaze(o->out, pupils, model);
      for (const auto& d : s.diagnostics)
        if (ctx.verbosity > 0) std::cerr << "map: " << d << '\n';
      emit(ctx, {{"rows", s.rows}, {"written", s.written}, {"rejected", s.rows - s.written}, {"out", o->out}},
           std::to_string(s.written) + " gaze rows written, " + std::to_string(s.rows - s.written) +
               " rejected -> " + o->out + "\n");
    };
  });
}

void add_surface(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("surface", "Locate a marker surface in scene frames and map gaze onto it");
  struct Opts {
    std::string dir, surface, recording, out;
    double rate = 30.0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("scene", o->dir, "Scene dataset directory with frames/*.pgm")->required();
  cmd->add_option("--surface", o->surface, "Surface definition JSON (default: <scene>/surface.json)");
  cmd->add_option("-r,--recording", o->recording, "Gaze recording to map onto the surface");
  cmd->add_option("-o,--out", o->out, "Surface CSV to write")->required();
  cmd->add_option("--rate", o->rate, "Frame rate when the dataset has no timestamps")->check(CLI::PositiveNumber);
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      const fs::path dir = o->dir;
      const auto def = load_surface(o->surface.empty() ? dir / "surface.json" : fs::path(o->surface));
      const auto frames = list_frames(dir);
      const auto times = frame_times(dir, frames.size(), StreamId::scene, o->rate);
      std::vector<RecordRow> gaze;
      std::vector<double> gaze_ts;
      if (!o->recording.empty()) {
        gaze = read_recording(o->recording);
        for (const auto& r : gaze) gaze_ts.push_back(r.timestamp);
      }
      std::vector<std::optional<std::size_t>> nearest(frames.size());
      for (const auto& ip : pair_by_time(gaze_ts, times, kDefaultMaxGap)) nearest[ip.b] = ip.a;

      const auto& scene = ctx.config.scene_camera;
      ensure_parent(o->out);
      std::ofstream csv(o->out, std::ios::binary);
      if (!csv) throw IoError(o->out, "cannot open for writing");
      csv << "frame_index,surface,x,y,on_surface,timestamp,markers,located\n";
      std::size_t located = 0, mapped = 0;
      char buf[160];
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto frame = read_pgm(frames[i]);
        if (frame.width() != scene.width || frame.height() != scene.height)
          throw DataError(frames[i].string() + ": frame size does not match the scene camera");
        const auto markers = detect_markers(frame);
        const auto h = locate_surface(def, markers, scene);
        if (h) ++located;
        std::optional<SurfaceGaze> sg;
        if (h && nearest[i]) {
          const auto& g = gaze[*nearest[i]];
          GazeDatum gd;
          gd.norm_pos = Vec2(g.gaze_x, g.gaze_y);
          gd.timestamp = g.timestamp;
          try {
            sg = map_gaze_to_surface(gd, *h, scene);
            ++mapped;
          } catch (const DegenerateError&) {
          }
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::snprintf(buf, sizeof buf, "%zu,%s,%.6g,%.6g,%d,%.6f,%zu,%d\n", i, def.name.c_str(),
                      sg ? sg->norm_pos.x() : nan, sg ? sg->norm_pos.y() : nan, sg && sg->on_surface ? 1 : 0,
                      times[i], markers.size(), h ? 1 : 0);
        csv << buf;
      }
      if (!csv) throw IoError(o->out, "write failed");
      emit(ctx, {{"frames", frames.size()}, {"located", located}, {"mapped", mapped}, {"out", o->out}},
           "surface '" + def.name + "' located in " + std::to_string(located) + "/" + std::to_string(frames.size()) +
               " frames, " + std::to_string(mapped) + " gaze points mapped -> " + o->out + "\n");
    };
  });
}

void add_evaluate(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("evaluate", "Accuracy and precision of a recorded screen-marker session");
  struct Opts {
    std::string session, out;
    EvalOptions eval;
    int degree = 0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("-s,--session", o->session, "Session directory")->required();
  cmd->add_option("--settle", o->eval.calibration.settle, "Seconds skipped after each marker jump")->check(CLI::NonNegativeNumber);
  cmd->add_option("--limit", o->eval.outlier_limit, "Outlier limit [deg]")->check(CLI::PositiveNumber);
  cmd->add_option("--degree", o->degree, "Calibration degree (default from config)");
  cmd->add_option("-o,--out", o->out, "Also write the JSON report here");
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      auto opts = o->eval;
      opts.degree = o->degree > 0 ? o->degree : ctx.config.calibration_degree;
      const auto report = evaluate_session(load_session(o->session), opts);
      if (!o->out.empty()) {
        ensure_parent(o->out);
        write_text(o->out, to_json(report) + "\n");
      }
      emit(ctx, json::parse(to_json(report)), to_table(report));
    };
  });
}

void add_benchmark(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("benchmark", "Detection-rate benchmark over a dataset written by synth");
  struct Opts {
    std::string dir, curve;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("dataset", o->dir, "Benchmark directory")->required();
  cmd->add_option("-j,--threads", o->threads, "Worker threads (0 = logical cores)");
  cmd->add_option("--curve", o->curve, "Write the detection-rate curve CSV here");
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      const auto r = run_benchmark(o->dir, ctx.config.detector, resolve_threads(o->threads));
      if (!o->curve.empty()) {
        ensure_parent(o->curve);
        write_curve_csv(o->curve, r.curve);
      }
      emit(ctx, json::parse(to_json(r)), to_table(r));
    };
  });
}

void add_latency(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("latency", "Stage latency report, simulated or measured on a live pipeline");
  struct Opts {
    std::string mode = "simulated";
    std::size_t frames = 0;
    std::uint64_t seed = 0;
    bool unpaced = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--mode", o->mode, "simulated | live")->check(CLI::IsMember({"simulated", "live"}));
  cmd->add_option("-n,--frames", o->frames, "Frames per pipeline (simulated 1400, live 240)");
  cmd->add_option("--seed", o->seed, "RNG seed");
  cmd->add_flag("--unpaced", o->unpaced, "Live: run lanes flat out instead of at camera rates");
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      json j;
      std::string text;
      if (o->mode == "simulated") {
        const std::size_t n = o->frames ? o->frames : 1400;
        for (const char* p : {"eye", "world"}) {
          const auto delays = default_delays(p);
          const auto r = simulate_pipeline(p, delays, n, mix_seed(o->seed, p[0]));
          j[p] = json::parse(to_json(r));
          text += to_table(r);
        }
      } else {
        EyeSceneRig rig = EyeSceneRig::standard(o->seed);
        rig.eye = ctx.config.eye_camera;
        rig.scene = ctx.config.scene_camera;
        LiveOptions lo;
        lo.eye_frames = o->frames ? o->frames : 240;
        lo.paced = !o->unpaced;
        lo.detector = ctx.config.detector;
        Bus bus;
        const auto r = measure_live_pipeline(rig, lo, bus);
        j["eye"] = json::parse(to_json(r.eye));
        j["world"] = json::parse(to_json(r.world));
        j["eye_throughput_fps"] = r.eye_throughput_fps;
        j["eye_detected"] = r.eye_detected;
        j["world_located"] = r.world_located;
        j["recency_violations"] = r.recency_violations;
        char buf[160];
        std::snprintf(buf, sizeof buf, "eye throughput %.1f frames/s, %zu pupils, %zu surfaces, %zu recency violations\n",
                      r.eye_throughput_fps, r.eye_detected, r.world_located, r.recency_violations);
        text = to_table(r.eye) + to_table(r.world) + buf;
      }
      emit(ctx, j, text);
    };
  });
}

void add_record(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("record", "Detect and map an eye dataset straight into a gaze recording");
  struct Opts {
    std::string dir, calibration, out;
    int threads = 0;
    double rate = 60.0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("dataset", o->dir, "Eye dataset directory with frames/*.pgm")->required();
  cmd->add_option("-k,--calibration", o->calibration, "Calibration JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o->out, "Recording directory")->required();
  cmd->add_option("-j,--threads", o->threads, "Worker threads (0 = logical cores)");
  cmd->add_option("--rate", o->rate, "Frame rate when the dataset has no timestamps")->check(CLI::PositiveNumber);
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      const auto model = load_calibration(o->calibration);
      const auto pupils = detect_dataset(o->dir, ctx.config.detector, o->threads, o->rate);
      const auto s = write_gaze(o->out, pupils, model);
      write_pupil_csv(fs::path(o->out) / kPupilCsvName, pupils);
      const fs::path world = timestamps_path(o->dir, StreamId::scene);
      if (fs::exists(world)) fs::copy_file(world, timestamps_path(o->out, StreamId::scene), fs::copy_options::overwrite_existing);
      for (const auto& d : s.diagnostics)
        if (ctx.verbosity > 0) std::cerr << "record: " << d << '\n';
      emit(ctx, {{"frames", s.rows}, {"written", s.written}, {"rejected", s.rows - s.written}, {"out", o->out}},
           std::to_string(s.written) + "/" + std::to_string(s.rows) + " frames recorded -> " + o->out + "\n");
    };
  });
}

void add_stream(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("stream", "Replay a recording over TCP at its frame pacing, or subscribe to one");
  struct Opts {
    std::string recording, bind, connect, prefix;
    double speed = 1.0;
    std::size_t wait_clients = 0;
    double wait_timeout = 10.0;
    std::size_t count = 0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("recording", o->recording, "Recording directory or gaze.csv to replay");
  cmd->add_option("--bind", o->bind, "Listen address host:port (default from config)");
  cmd->add_option("--connect", o->connect, "Subscribe to a running stream and print messages as JSON lines");
  cmd->add_option("--prefix", o->prefix, "Topic prefix filter");
  cmd->add_option("--speed", o->speed, "Replay speed factor (0 = no pacing)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--wait-clients", o->wait_clients, "Wait for this many subscribers before replaying");
  cmd->add_option("--wait-timeout", o->wait_timeout, "Seconds to wait for subscribers")->check(CLI::NonNegativeNumber);
  cmd->add_option("--count", o->count, "Subscriber: stop after this many messages (0 = until closed)");
  cmd->callback([&ctx, o] {
    ctx.action = [&ctx, o] {
      if (!o->connect.empty()) {
        TcpSubscriber sub(parse_endpoint(o->connect));
        std::size_t n = 0;
        while (auto m = sub.receive()) {
          if (!m->topic.starts_with(o->prefix)) continue;
          std::cout << json_line({{"topic", m->topic}, {"seq", m->seq}, {"payload", json::parse(m->payload)}});
          std::cout.flush();
          if (o->count && ++n >= o->count) break;
        }
        return;
      }
      if (o->recording.empty()) throw DataError("stream needs a recording to replay or --connect");
      const auto rows = read_recording(o->recording);
      Bus bus;
      TcpBridge bridge(bus, parse_endpoint(o->bind.empty() ? ctx.config.io.bind : o->bind), o->prefix);
      std::cerr << "stream: listening on port " << bridge.port() << '\n';
      if (o->wait_clients && !bridge.wait_for_clients(o->wait_clients, o->wait_timeout))
        throw DataError("timed out waiting for " + std::to_string(o->wait_clients) + " subscriber(s)");
      const double start = monotonic_seconds();
      const double t0 = rows.empty() ? 0.0 : rows.front().timestamp;
      for (const auto& r : rows) {
        if (o->speed > 0.0) {
          const double due = start + (r.timestamp - t0) / o->speed;
          const double wait = due - monotonic_seconds();
          if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
        GazeDatum g;
        g.norm_pos = Vec2(r.gaze_x, r.gaze_y);
        g.base.norm_pos = Vec2(r.pupil_x, r.pupil_y);
        g.base.confidence = r.confidence;
        g.base.timestamp = r.timestamp;
        g.timestamp = r.timestamp;
        bus.publish("pupil", pupil_payload(g.base));
        bus.publish("gaze", gaze_payload(g));
      }
      bus.close();
      bridge.stop();
      emit(ctx, {{"rows", rows.size()}, {"port", bridge.port()}},
           "streamed " + std::to_string(rows.size()) + " rows on port " + std::to_string(bridge.port()) + "\n");
    };
  });
}

}  // namespace gazekit::cli
