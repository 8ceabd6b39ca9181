#include "gazekit/timing.hpp"

#include "gazekit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gazekit {

ClockModel ClockModel::software(double offset, double jitter_sd) {
  ClockModel c;
  c.kind = ClockKind::software;
  c.offset = offset;
  c.jitter_sd = jitter_sd;
  c.validate();
  return c;
}

void ClockModel::validate() const {
  if (!(jitter_sd >= 0.0)) throw DataError("clock jitter_sd must be >= 0");
  if (kind == ClockKind::hardware && offset != 0.0)
    throw DataError("hardware clock must have zero offset");
}

double stamp(double exposure, const ClockModel& clock, std::mt19937_64& rng) {
  if (clock.kind == ClockKind::hardware) return exposure;
  if (clock.jitter_sd == 0.0) return exposure + clock.offset;
  std::normal_distribution<double> noise(0.0, clock.jitter_sd);
  return exposure + clock.offset + noise(rng);
}

double jitter_stat(std::span<const double> ts) {
  if (ts.size() < 3) throw DataError("jitter_stat needs at least 3 timestamps");
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (!(ts[i] > ts[i - 1])) throw DataError("jitter_stat: timestamps not strictly increasing");
  const std::size_t n = ts.size() - 1;
  double mean = 0.0;
  for (std::size_t i = 1; i < ts.size(); ++i) mean += ts[i] - ts[i - 1];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double d = (ts[i] - ts[i - 1]) - mean;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(n - 1));
}

std::vector<IndexPair> pair_by_time(std::span<const double> a, std::span<const double> b,
                                    double max_gap) {
  std::vector<IndexPair> out;
  if (a.empty()) return out;
  out.reserve(b.size());
  std::size_t j = 0;  // first a element with a[j] >= b[i], advanced monotonically
  for (std::size_t i = 0; i < b.size(); ++i) {
    while (j < a.size() && a[j] < b[i]) ++j;
    std::size_t best;
    if (j == 0) {
      best = 0;
    } else if (j == a.size()) {
      best = a.size() - 1;
    } else {
      const double before = b[i] - a[j - 1];
      const double after = a[j] - b[i];
      best = after < before ? j : j - 1;
    }
    // Equal timestamps in `a`: the earliest of them wins.
    while (best > 0 && a[best - 1] == a[best]) --best;
    if (std::abs(a[best] - b[i]) <= max_gap) out.push_back({best, i});
  }
  return out;
}

LatencyReport aggregate_latency(std::string pipeline, std::span<const std::string> names,
                                std::span<const std::vector<double>> rows) {
  if (rows.size() < 2) throw DataError("latency report needs at least 2 frames");
  LatencyReport r;
  r.pipeline = std::move(pipeline);
  r.samples = rows.size();
  const double n = static_cast<double>(rows.size());
  std::vector<double> totals(rows.size(), 0.0);
  for (std::size_t s = 0; s < names.size(); ++s) {
    StageStats st;
    st.name = names[s];
    for (std::size_t f = 0; f < rows.size(); ++f) {
      if (rows[f].size() != names.size()) throw DataError("latency row has wrong stage count");
      st.mean += rows[f][s];
      totals[f] += rows[f][s];
    }
    st.mean /= n;
    double var = 0.0;
    for (const auto& row : rows) var += (row[s] - st.mean) * (row[s] - st.mean);
    st.sd = std::sqrt(var / (n - 1.0));
    r.stages.push_back(std::move(st));
  }
  for (const auto& st : r.stages) r.total_mean += st.mean;
  double var = 0.0;
  for (double t : totals) var += (t - r.total_mean) * (t - r.total_mean);
  r.total_sd = std::sqrt(var / (n - 1.0));
  return r;
}

std::string to_json(const LatencyReport& r, int indent) {
  nlohmann::json j;
  j["pipeline"] = r.pipeline;
  j["samples"] = r.samples;
  j["total_mean"] = r.total_mean;
  j["total_sd"] = r.total_sd;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : r.stages) j["stages"].push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}});
  return j.dump(indent);
}

std::string to_table(const LatencyReport& r) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%s pipeline, %zu samples\n", r.pipeline.c_str(), r.samples);
  os << line;
  std::snprintf(line, sizeof line, "  %-12s %12s %12s\n", "stage", "mean [ms]", "sd [ms]");
  os << line;
  for (const auto& s : r.stages) {
    std::snprintf(line, sizeof line, "  %-12s %12.3f %12.3f\n", s.name.c_str(), s.mean * 1e3, s.sd * 1e3);
    os << line;
  }
  std::snprintf(line, sizeof line, "  %-12s %12.3f %12.3f\n", "total", r.total_mean * 1e3, r.total_sd * 1e3);
  os << line;
  return os.str();
}

LatencyReport simulate_pipeline(std::string pipeline, std::span<const StageDelay> stages,
                                std::size_t frames, std::uint64_t seed) {
  if (stages.size() != kStageCount) throw DataError("simulated pipeline needs one delay per stage");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> rows(frames, std::vector<double>(kStageCount));
  for (auto& row : rows) {
    for (std::size_t s = 0; s < kStageCount; ++s) {
      double v = stages[s].mean;
      if (stages[s].sd > 0.0) v += std::normal_distribution<double>(0.0, stages[s].sd)(rng);
      row[s] = std::max(0.0, v);
    }
  }
  const std::vector<std::string> names(std::begin(kStageNames), std::end(kStageNames));
  return aggregate_latency(std::move(pipeline), names, rows);
}

double monotonic_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace gazekit
