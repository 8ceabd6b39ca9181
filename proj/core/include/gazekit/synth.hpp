#pragma once

#include "gazekit/gaze_map.hpp"
#include "gazekit/homography.hpp"
#include "gazekit/surface.hpp"
#include "gazekit/timing.hpp"
#include "gazekit/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace gazekit {

/// Derives an independent stream seed (splitmix64 finalizer over both words).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Eye images

struct Glint {
  Vec2 center = Vec2::Zero();
  double radius = 3.0;
};

struct EyeAppearance {
  double pupil = 20.0;
  double iris_inner = 90.0;
  double iris_outer = 120.0;
  double iris_scale = 2.4;  // iris radius / pupil major axis
  double sclera = 200.0;
  double eyelid = 170.0;
  double glint = 255.0;
};

/// Everything needed to render one eye frame.
struct EyeFrameSpec {
  int width = 640;
  int height = 480;
  Ellipse pupil;
  EyeAppearance appearance;
  /// Fraction of the pupil's vertical extent hidden by the upper eyelid.
  double occlusion = 0.0;
  std::vector<Glint> glints;
  double noise_sd = 0.0;
  std::uint64_t noise_seed = 0;
  double timestamp = 0.0;
};

struct EyeRender {
  GrayFrame frame;
  Ellipse truth;
};

/// Dark pupil over an iris gradient and sclera, saturated glints, an eyelid
/// band and additive Gaussian noise. Boundary pixels use 4x4 supersampled
/// coverage. Pure function of the spec.
EyeRender render_eye_frame(const EyeFrameSpec& spec);

/// Foreshortened pupil for an eye looking `offset_px` away from the camera
/// axis: the minor axis points along the offset.
Ellipse foreshortened_pupil(const Vec2& center, double radius, const Vec2& offset_px,
                            double eye_px_per_degree);

// ---------------------------------------------------------------------------
// Rig

struct RenderNoise {
  double pixel_noise_sd = 0.0;
  int glint_count = 0;
  double glint_radius = 3.0;
  double occlusion = 0.0;  // in [0, 1)
};

/// Error-source knobs of a simulated subject and tracker.
struct SessionNoise {
  double pupil_noise_px = 0.0;        // eye px, stationary sd of detector error
  double pupil_noise_tau = 1.0;       // s, correlation time of the detector error
  double oculomotor_noise_deg = 0.0;  // white fixational jitter per sample
  double blink_rate = 0.0;            // Poisson arrivals per second
  Range blink_duration{0.1, 0.3};     // s
  Vec2 headset_drift = Vec2::Zero();  // eye px per second after calibration
  double saccade_latency = 0.2;       // s until gaze lands on a new target
};

struct EyeSceneRig {
  CameraIntrinsics eye{640, 480, 90.0};
  CameraIntrinsics scene{1280, 720, 90.0};
  double eye_rate = 60.0;
  double scene_rate = 30.0;
  ClockModel eye_clock = ClockModel::hardware();
  ClockModel scene_clock = ClockModel::hardware();
  /// Pupil displacement in eye pixels per degree of gaze rotation.
  double eye_px_per_degree = 8.0;
  double pupil_radius = 35.0;
  /// Eye-normalized pupil position when the eye looks along the camera axis;
  /// the pupil appears round there.
  Vec2 eye_axis_norm{0.5, 0.45};
  /// Ground-truth transfer function (pupil normalized -> scene normalized).
  CalibrationModel gaze_truth;
  EyeAppearance appearance;
  RenderNoise render;
  SessionNoise session;
  /// Lissajous gaze path used by render_eye_frame(rig, t).
  Vec2 path_amplitude{0.35, 0.3};
  Vec2 path_frequency{0.13, 0.21};
  std::uint64_t seed = 0;

  /// Desk setup: 1280x720 / 90 degree scene camera, 640x480 eye camera, and a
  /// mildly nonlinear quadratic transfer function.
  static EyeSceneRig standard(std::uint64_t seed = 0);

  /// Inverse of gaze_truth (Newton iterations). Throws DataError for targets
  /// outside the scene frame or when Newton does not converge.
  Vec2 pupil_for_target(const Vec2& scene_norm) const;
  /// Pupil ellipse in eye pixels for a gaze target.
  Ellipse pupil_ellipse(const Vec2& scene_norm) const;
  /// Gaze target of the Lissajous path at time t.
  Vec2 path_target(double t) const;

  void validate() const;
};

std::string to_json(const EyeSceneRig& rig, int indent = 2);
EyeSceneRig rig_from_json(const std::string& text);

/// Eye frame at time t along the rig's gaze path, with the rig's render noise.
EyeRender render_eye_frame(const EyeSceneRig& rig, double t);

// ---------------------------------------------------------------------------
// Scene images

struct ConcentricMarkerSpec {
  Vec2 center = Vec2::Zero();
  double radius = 40.0;
  MarkerKind kind = MarkerKind::collect;
};

struct FiducialSpec {
  int id = 0;
  MarkerCorners corners{};  // scene pixels, canonical order
};

struct SurfacePlacement {
  SurfaceDefinition definition;
  /// Surface-normalized -> scene pixels.
  Homography surface_to_scene;
};

struct SceneSpec {
  int width = 1280;
  int height = 720;
  double background = 160.0;
  std::optional<ConcentricMarkerSpec> concentric;
  std::vector<FiducialSpec> fiducials;
  std::vector<SurfacePlacement> surfaces;
  double noise_sd = 0.0;
  std::uint64_t noise_seed = 0;
  double timestamp = 0.0;
};

struct SceneTruth {
  std::optional<Vec2> concentric_center;
  std::vector<Marker> markers;  // every fiducial, standalone or on a surface
};

struct SceneRender {
  GrayFrame frame;
  SceneTruth truth;
};

SceneRender render_scene_frame(const SceneSpec& spec);

/// Surface with a marker in each corner; marker side is `marker_size` in
/// surface units. Ids must be distinct.
SurfaceDefinition corner_marker_surface(std::string name, std::array<int, 4> ids,
                                        double marker_size = 0.2);

/// Scene frame showing a calibration marker at the rig's schedule position.
SceneRender render_scene_frame(const EyeSceneRig& rig, const Vec2& marker_norm, double t,
                               MarkerKind kind = MarkerKind::collect);

// ---------------------------------------------------------------------------
// Detection benchmark

enum class Tier { clean, noisy, occluded };
const char* to_string(Tier tier);

struct BenchmarkFrame {
  int index = 0;
  Tier tier = Tier::clean;
  EyeFrameSpec spec;
};

/// Seeded frame specs cycling clean / noisy / occluded+glint tiers.
std::vector<BenchmarkFrame> benchmark_specs(const EyeSceneRig& rig, int frames);

struct BenchmarkTruth {
  int index = 0;
  Tier tier = Tier::clean;
  double timestamp = 0.0;
  Ellipse ellipse;
  double occlusion = 0.0;
  int glints = 0;
  double noise_sd = 0.0;
};

/// Writes frames/%06d.pgm, truth.csv and rig.json under dir.
void generate_benchmark(const EyeSceneRig& rig, int frames, const std::filesystem::path& dir);
std::vector<BenchmarkTruth> read_benchmark_truth(const std::filesystem::path& dir);
std::filesystem::path benchmark_frame_path(const std::filesystem::path& dir, int index);

// ---------------------------------------------------------------------------
// Simulated recording sessions

struct SessionProtocol {
  double lead_in = 0.5;            // s before the first calibration site
  double calibration_dwell = 1.5;  // s per calibration site
  double pause = 1.0;              // s between calibration and test
  int random_sites = 10;
  double test_dwell = 1.5;
  bool revisit_calibration_sites = true;
  /// Test-phase site indices during which every pupil datum has confidence 0.
  std::vector<int> occluded_sites;
  /// Extra blinks as (start, duration) in seconds.
  std::vector<std::pair<double, double>> injected_blinks;
};

struct SimulatedSession {
  CameraIntrinsics eye;
  CameraIntrinsics scene;
  std::vector<MarkerSite> calibration_sites;
  std::vector<MarkerSite> test_sites;
  std::vector<PupilDatum> pupils;
  std::vector<MarkerObservation> markers;
  /// True scene-normalized gaze for each pupil datum.
  std::vector<Vec2> true_gaze;
  /// Every scene frame, also those without a visible marker.
  std::vector<double> scene_timestamps;
};

SimulatedSession simulate_session(const EyeSceneRig& rig, const SessionProtocol& protocol);

/// Directory layout: pupil.csv, markers.csv, world_timestamps.csv, session.json.
void save_session(const std::filesystem::path& dir, const SimulatedSession& session);
SimulatedSession load_session(const std::filesystem::path& dir);

}  // namespace gazekit
