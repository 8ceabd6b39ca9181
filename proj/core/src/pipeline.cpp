#include "gazekit/pipeline.hpp"

#include "gazekit/error.hpp"
#include "gazekit/image.hpp"
#include "gazekit/pupil_detect.hpp"
#include "gazekit/surface.hpp"

#include <cmath>
#include <mutex>
#include <string>
#include <thread>

namespace gazekit {

namespace {

struct LaneEvent {
  PublishEvent event;
  std::vector<double> stages;
};

void sleep_until_mono(double t) {
  const double dt = t - monotonic_seconds();
  if (dt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
}

std::vector<std::string> scene_frames(const EyeSceneRig& rig, std::size_t n, SurfaceDefinition& surface) {
  surface = corner_marker_surface("desk", {0, 1, 2, 3});
  const double w = rig.scene.width, h = rig.scene.height;
  const std::vector<Vec2> unit{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const std::vector<Vec2> quad{{0.23 * w, 0.2 * h}, {0.77 * w, 0.24 * h}, {0.79 * w, 0.84 * h}, {0.21 * w, 0.8 * h}};
  SceneSpec spec;
  spec.width = rig.scene.width;
  spec.height = rig.scene.height;
  spec.surfaces.push_back({surface, estimate_homography(unit, quad)});
  spec.noise_sd = rig.render.pixel_noise_sd;
  std::vector<std::string> out;
  for (std::size_t j = 0; j < n; ++j) {
    spec.timestamp = j / rig.scene_rate;
    spec.noise_seed = mix_seed(rig.seed ^ 0x5ce7ull, j);
    out.push_back(encode_pgm(render_scene_frame(spec).frame));
  }
  return out;
}

}  // namespace

LiveReport measure_live_pipeline(const EyeSceneRig& rig, const LiveOptions& options, Bus& bus) {
  rig.validate();
  options.detector.validate();
  if (options.eye_frames < 2) throw DataError("live pipeline needs at least 2 eye frames");
  const std::size_t n_eye = options.eye_frames;
  const std::size_t n_world =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(n_eye * rig.scene_rate / rig.eye_rate)));

  // Frames are encoded up front; decoding is the first measured stage.
  std::vector<std::string> eye_bytes;
  eye_bytes.reserve(n_eye);
  for (std::size_t k = 0; k < n_eye; ++k) eye_bytes.push_back(encode_pgm(render_eye_frame(rig, k / rig.eye_rate).frame));
  SurfaceDefinition surface;
  const auto world_bytes = scene_frames(rig, n_world, surface);

  OrderedQueue<LaneEvent> queue;
  std::mutex gaze_mutex;
  std::optional<GazeDatum> latest_gaze;
  const double t0 = monotonic_seconds() + 0.05;

  auto eye_lane = [&] {
    double lane_free = t0;
    for (std::size_t k = 0; k < n_eye; ++k) {
      const double release = options.paced ? t0 + k / rig.eye_rate : std::max(t0, lane_free);
      if (options.paced) sleep_until_mono(release);
      const double pickup = monotonic_seconds();
      StageTimer timer;
      const GrayFrame frame = decode_pgm(eye_bytes[k]);
      const double decode = timer.mark();
      const Detection d = detect(frame, options.detector);
      const double det = timer.mark();
      std::optional<GazeDatum> gaze;
      if (d.pupil) {
        gaze = map_gaze(*d.pupil, rig.gaze_truth);
        std::lock_guard lock(gaze_mutex);
        latest_gaze = gaze;
      }
      const double map = timer.mark();
      const double finished = monotonic_seconds();
      if (d.pupil) {
        bus.publish("pupil", pupil_payload(*d.pupil));
        bus.publish("gaze", gaze_payload(*gaze));
      }
      const double pub = timer.mark();
      const double published = monotonic_seconds();
      lane_free = published;
      LaneEvent e;
      e.event = {StreamId::eye, k, release, published, finished, decode + det + map + pub, d.pupil.has_value()};
      e.stages = {0.0, 0.0, std::max(0.0, pickup - release), decode, det, map, pub};
      queue.push(std::move(e));
    }
  };
  auto world_lane = [&] {
    double lane_free = t0;
    for (std::size_t j = 0; j < n_world; ++j) {
      const double release = options.paced ? t0 + j / rig.scene_rate : std::max(t0, lane_free);
      if (options.paced) sleep_until_mono(release);
      const double pickup = monotonic_seconds();
      StageTimer timer;
      const GrayFrame frame = decode_pgm(world_bytes[j]);
      const double decode = timer.mark();
      const auto markers = detect_markers(frame);
      const auto h = locate_surface(surface, markers, rig.scene);
      const double det = timer.mark();
      std::optional<SurfaceGaze> sg;
      if (h) {
        GazeDatum g;
        {
          std::lock_guard lock(gaze_mutex);
          if (latest_gaze) g = *latest_gaze;
          else g.norm_pos = Vec2(0.5, 0.5);
        }
        try {
          sg = map_gaze_to_surface(g, *h, rig.scene);
        } catch (const DegenerateError&) {
        }
      }
      const double map = timer.mark();
      const double finished = monotonic_seconds();
      if (sg) bus.publish("surface", surface_payload(surface.name, *sg));
      const double pub = timer.mark();
      const double published = monotonic_seconds();
      lane_free = published;
      LaneEvent e;
      e.event = {StreamId::scene, j, release, published, finished, decode + det + map + pub, h.has_value()};
      e.stages = {0.0, 0.0, std::max(0.0, pickup - release), decode, det, map, pub};
      queue.push(std::move(e));
    }
  };

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto guarded = [&](auto&& fn) {
    return [&, fn] {
      try {
        fn();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    };
  };
  std::thread eye_thread(guarded(eye_lane));
  std::thread world_thread(guarded(world_lane));
  std::thread closer([&] {
    eye_thread.join();
    world_thread.join();
    queue.close();
  });

  LiveReport rep;
  std::vector<std::vector<double>> eye_rows, world_rows;
  double eye_processing = 0.0;
  while (auto e = queue.pop()) {
    auto ev = e->event;
    if (ev.stream == StreamId::eye) {
      eye_processing += ev.processing;
      if (ev.produced) ++rep.eye_detected;
      eye_rows.push_back(std::move(e->stages));
    } else {
      if (ev.produced) ++rep.world_located;
      world_rows.push_back(std::move(e->stages));
    }
    rep.events.push_back(ev);
  }
  closer.join();
  if (failure) std::rethrow_exception(failure);

  // Scene frame j covers eye exposures in [j / scene_rate, (j + 1) / scene_rate).
  std::vector<const PublishEvent*> scene_by_index(n_world, nullptr);
  for (const auto& ev : rep.events)
    if (ev.stream == StreamId::scene) scene_by_index[ev.index] = &ev;
  for (const auto& ev : rep.events) {
    if (ev.stream != StreamId::eye) continue;
    const auto j = static_cast<std::size_t>(std::floor(ev.index / rig.eye_rate * rig.scene_rate + 1e-9));
    if (j >= n_world || !scene_by_index[j]) continue;
    const auto* sc = scene_by_index[j];
    if (ev.finished < sc->published && ev.published > sc->published) ++rep.recency_violations;
  }

  const std::vector<std::string> names(std::begin(kStageNames), std::end(kStageNames));
  rep.eye = aggregate_latency("eye", names, eye_rows);
  rep.world = aggregate_latency("world", names, world_rows);
  rep.eye_throughput_fps = eye_processing > 0.0 ? static_cast<double>(eye_rows.size()) / eye_processing : 0.0;
  return rep;
}

}  // namespace gazekit
