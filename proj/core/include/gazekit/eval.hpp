#pragma once

#include "gazekit/gaze_map.hpp"
#include "gazekit/synth.hpp"
#include "gazekit/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazekit {

// ---------------------------------------------------------------------------
// Accuracy and precision

/// One gaze sample matched with the target it should have hit.
struct AngularPair {
  Vec2 gaze = Vec2::Zero();    // normalized scene coordinates
  Vec2 target = Vec2::Zero();  // normalized scene coordinates
  double distance = 0.0;       // degrees
  int site = -1;
  double timestamp = 0.0;
};

struct OutlierSplit {
  std::vector<AngularPair> kept;
  std::vector<AngularPair> discarded;
};

inline constexpr double kOutlierLimitDeg = 5.0;

/// Pairs strictly beyond the limit are discarded; order is preserved.
OutlierSplit filter_outliers(std::span<const AngularPair> pairs, double limit_deg = kOutlierLimitDeg);

/// Mean angular offset. Throws DataError on empty input.
double accuracy(std::span<const AngularPair> kept);
double accuracy(std::span<const double> offsets_deg);

struct PrecisionResult {
  double pooled = 0.0;           // RMS over every successive distance
  double mean_per_window = 0.0;  // mean of per-window RMS values
  std::vector<double> per_window;  // NaN for skipped windows
  std::size_t windows_used = 0;
  std::size_t distances = 0;
};

/// RMS of successive angular distances inside each window (degrees). Windows
/// with fewer than 2 samples are skipped; throws DataError if all are.
PrecisionResult precision(std::span<const std::vector<double>> successive_deg);
/// Same, from gaze points (normalized scene coordinates) per window.
PrecisionResult precision(std::span<const std::vector<Vec2>> windows, const CameraIntrinsics& scene);

// ---------------------------------------------------------------------------
// Detection benchmark

/// Symmetric Hausdorff distance between two ellipse contours. Each contour is
/// sampled parametrically and measured against the exact other curve; the
/// sample count starts at 128 and doubles until the value changes < 0.5%.
double ellipse_hausdorff(const Ellipse& e1, const Ellipse& e2);
/// Fixed sampling density, for oracles and benchmarks.
double ellipse_hausdorff(const Ellipse& e1, const Ellipse& e2, int samples);

struct DetectionOutcome {
  std::optional<Ellipse> detected;
  Ellipse truth;
};

struct DetectionRateCurve {
  std::vector<double> thresholds;  // px, ascending
  std::vector<double> rates;       // fraction in [0, 1]

  /// Rate at an exact threshold of the curve; throws DataError if absent.
  double rate_at(double threshold) const;
};

/// 0, 0.5, ..., 10 px.
std::vector<double> default_thresholds();

/// rate(t) = fraction of results with a detection within t px. Throws
/// DataError for empty results or unsorted thresholds.
DetectionRateCurve detection_rate_curve(std::span<const DetectionOutcome> results,
                                        std::span<const double> thresholds);
/// From precomputed errors; nullopt is a missed detection.
DetectionRateCurve detection_rate_curve(std::span<const std::optional<double>> errors,
                                        std::span<const double> thresholds);

/// CSV with header "threshold,rate".
std::string curve_csv(const DetectionRateCurve& curve);
void write_curve_csv(const std::filesystem::path& path, const DetectionRateCurve& curve);

struct TierSummary {
  Tier tier = Tier::clean;
  std::size_t frames = 0;
  std::size_t missed = 0;
  double rate_2px = 0.0;
  double rate_5px = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkTruth> truth;
  std::vector<std::optional<PupilDatum>> detections;
  std::vector<std::optional<double>> errors;  // Hausdorff px, nullopt when missed
  DetectionRateCurve curve;
  std::vector<TierSummary> tiers;
  double rate_2px = 0.0;
  double rate_5px = 0.0;
  double detect_seconds = 0.0;  // summed per-frame detection time
  double wall_seconds = 0.0;    // including frame decoding
  int threads = 1;
};

/// Detects every frame of a dataset written by generate_benchmark and scores
/// it against truth.csv. `threads` <= 0 uses all logical cores.
BenchmarkResult run_benchmark(const std::filesystem::path& dir, const DetectorParams& params,
                              int threads = 1);

std::string to_json(const BenchmarkResult& result, int indent = 2);
std::string to_table(const BenchmarkResult& result);

// ---------------------------------------------------------------------------
// Accuracy sessions

struct EvalOptions {
  ScreenMarkerOptions calibration;  // settle, min_confidence and max_gap are shared with the test phase
  int degree = kDefaultCalibrationDegree;
  double outlier_limit = kOutlierLimitDeg;
};

struct SiteReport {
  int index = 0;
  Vec2 target = Vec2::Zero();
  std::size_t n_used = 0;
  std::size_t n_discarded = 0;
  double accuracy = 0.0;   // NaN without kept pairs
  double precision = 0.0;  // NaN without a usable window
};

struct AccuracyReport {
  double accuracy = 0.0;
  double precision = 0.0;          // pooled
  double precision_per_site = 0.0;  // mean of per-site values
  std::size_t n_used = 0;
  std::size_t n_discarded = 0;
  std::vector<SiteReport> sites;
  /// Test sites for which no pair survived confidence gating.
  std::vector<int> sites_without_pairs;
  std::size_t calibration_pairs = 0;
  double calibration_rms = 0.0;
  std::vector<AngularPair> pairs;  // kept and discarded, in time order
};

/// Calibrates on the session's calibration sites, then pairs every settled
/// test-phase marker observation with the nearest pupil datum, maps it,
/// filters outliers and reports accuracy and precision. Pairs whose pupil
/// confidence is below the threshold are absent, not discarded.
AccuracyReport evaluate_session(const SimulatedSession& session, const EvalOptions& options = {});
AccuracyReport run_accuracy_session(const EyeSceneRig& rig, const SessionProtocol& protocol = {},
                                    const EvalOptions& options = {});

std::string to_json(const AccuracyReport& report, int indent = 2);
std::string to_table(const AccuracyReport& report);

}  // namespace gazekit
