#pragma once

#include "gazekit/bus.hpp"
#include "gazekit/synth.hpp"
#include "gazekit/timing.hpp"

#include <cstddef>
#include <vector>

namespace gazekit {

struct LiveOptions {
  std::size_t eye_frames = 240;
  /// Release frames at the rig's frame rates; otherwise each lane runs flat out.
  bool paced = true;
  DetectorParams detector;
};

struct PublishEvent {
  StreamId stream = StreamId::eye;
  std::size_t index = 0;
  double released = 0.0;   // s on the monotonic clock, frame handed to the lane
  double published = 0.0;  // s on the monotonic clock
  double finished = 0.0;   // s on the monotonic clock, result ready to publish
  double processing = 0.0;  // s spent in the lane's own stages
  bool produced = false;    // pupil found or surface located
};

struct LiveReport {
  LatencyReport eye;
  LatencyReport world;
  std::vector<PublishEvent> events;  // in aggregation order
  /// 1 / mean eye processing time (decode, detect, map, publish).
  double eye_throughput_fps = 0.0;
  std::size_t eye_detected = 0;
  std::size_t world_located = 0;
  /// Eye frames that finished before the scene frame exposed with them was
  /// published, yet were published after it.
  std::size_t recency_violations = 0;
};

/// Runs the eye and world lanes on synthetic frames from the rig, each lane
/// in its own thread, and measures wall-clock stage durations. Camera-side
/// stages (exposure, readout) are not observable here and report 0; the
/// transfer stage is the wait between frame release and lane pickup. Eye
/// results are published on the bus as soon as they are mapped; the world
/// lane maps the latest published gaze onto a fiducial surface.
LiveReport measure_live_pipeline(const EyeSceneRig& rig, const LiveOptions& options, Bus& bus);

}  // namespace gazekit
