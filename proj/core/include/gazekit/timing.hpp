#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gazekit {

enum class ClockKind : std::uint8_t { hardware, software };

/// Where a frame timestamp comes from. Hardware stamps mark the start of
/// exposure; software stamps are taken when the driver hands the frame over,
/// so they carry a positive mean delay and jitter.
struct ClockModel {
  ClockKind kind = ClockKind::hardware;
  double offset = 0.0;     // s, mean delay after exposure
  double jitter_sd = 0.0;  // s

  static ClockModel hardware() { return {}; }
  static ClockModel software(double offset, double jitter_sd);
  /// Software fallback delays measured for the world and eye cameras.
  static ClockModel software_world() { return software(0.119, 0.003); }
  static ClockModel software_eye() { return software(0.038, 0.002); }

  void validate() const;
};

/// Timestamp for a frame exposed at `exposure`.
double stamp(double exposure, const ClockModel& clock, std::mt19937_64& rng);

/// Standard deviation of successive inter-frame intervals. Needs >= 3 strictly
/// increasing timestamps, otherwise throws DataError.
double jitter_stat(std::span<const double> timestamps);

struct IndexPair {
  std::size_t a = 0;
  std::size_t b = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Pairs every element of `b` with the element of `a` nearest in time. Ties go
/// to the earlier `a` element; pairs further apart than max_gap are dropped.
/// Both series must be sorted ascending.
std::vector<IndexPair> pair_by_time(std::span<const double> a, std::span<const double> b,
                                    double max_gap = std::numeric_limits<double>::infinity());

inline constexpr double kDefaultMaxGap = 1.0 / 30.0;

/// Pipeline stages from sensor exposure to broadcast.
inline constexpr const char* kStageNames[] = {"exposure", "readout",  "transfer", "decompress",
                                              "detect",   "map",      "broadcast"};
inline constexpr std::size_t kStageCount = 7;

struct StageStats {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
};

struct LatencyReport {
  std::string pipeline;  // "eye" or "world"
  std::vector<StageStats> stages;
  double total_mean = 0.0;
  double total_sd = 0.0;
  std::size_t samples = 0;
};

/// Aggregates per-frame stage durations (seconds). Every row must have one
/// entry per stage name. Throws DataError for fewer than 2 rows.
LatencyReport aggregate_latency(std::string pipeline, std::span<const std::string> stage_names,
                                std::span<const std::vector<double>> per_frame);

std::string to_json(const LatencyReport& report, int indent = 2);
std::string to_table(const LatencyReport& report);

/// Gaussian delay model of one stage, clamped at zero.
struct StageDelay {
  double mean = 0.0;
  double sd = 0.0;
};

/// Simulated pipeline measurement: draws N frames of stage delays.
LatencyReport simulate_pipeline(std::string pipeline, std::span<const StageDelay> stages,
                                std::size_t frames, std::uint64_t seed);

/// Records wall-clock stage boundaries for one frame.
class StageTimer {
 public:
  using Clock = std::chrono::steady_clock;

  StageTimer() : last_(Clock::now()) {}
  void restart() { last_ = Clock::now(); }
  /// Seconds since the previous mark (or construction / restart).
  double mark() {
    const auto now = Clock::now();
    const double dt = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return dt;
  }

 private:
  Clock::time_point last_;
};

/// Seconds on the steady clock; the shared time base of live runs.
double monotonic_seconds();

/// Unbounded multi-producer FIFO used to hand lane events to the aggregator.
template <class T>
class OrderedQueue {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  /// Blocks until an item is available; empty once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace gazekit
