#include "gazekit/error.hpp"
#include "gazekit/timing.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace gazekit {
namespace {

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

// Exhaustive nearest search with the earlier-wins tie-break.
std::vector<IndexPair> brute_pairs(const std::vector<double>& a, const std::vector<double>& b, double max_gap) {
  std::vector<IndexPair> out;
  for (std::size_t j = 0; j < b.size(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i)
      if (std::abs(a[i] - b[j]) < std::abs(a[best] - b[j])) best = i;
    if (!a.empty() && std::abs(a[best] - b[j]) <= max_gap) out.push_back({best, j});
  }
  return out;
}

std::vector<double> sorted_series(std::mt19937_64& rng, std::size_t n, double span) {
  std::vector<double> v(n);
  for (auto& x : v) x = test::uniform(rng, 0, span);
  std::sort(v.begin(), v.end());
  return v;
}

TEST(Stamp, HardwareIsExact) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(stamp(5.0, ClockModel::hardware(), rng), 5.0);
}

TEST(Stamp, SoftwareWorldStatistics) {
  std::mt19937_64 rng(2);
  std::vector<double> d;
  for (int i = 0; i < 10000; ++i) {
    const double e = i / 30.0;
    d.push_back(stamp(e, ClockModel::software_world(), rng) - e);
  }
  EXPECT_NEAR(mean(d), 0.119, 0.001);
  EXPECT_NEAR(sd(d), 0.003, 0.15 * 0.003);
}

TEST(Stamp, SoftwareWithoutJitterIsDeterministic) {
  std::mt19937_64 rng(3);
  const ClockModel c = ClockModel::software(0.05, 0.0);
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(stamp(i * 0.1, c, rng), i * 0.1 + 0.05);
  EXPECT_THROW(ClockModel::software(0.1, -1.0), DataError);
}

TEST(Jitter, PeriodicStreamIsZero) {
  std::vector<double> t;
  for (int i = 0; i < 300; ++i) t.push_back(i / 30.0);
  EXPECT_NEAR(jitter_stat(t), 0.0, 1e-12);
}

TEST(Jitter, RecoversIntervalSpread) {
  for (const double target : {0.0001, 0.0004}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(target * 1e6));
    std::normal_distribution<double> n(0.0, target);
    std::vector<double> t{0.0};
    for (int i = 0; i < 5000; ++i) t.push_back(t.back() + 1.0 / 60 + n(rng));
    EXPECT_NEAR(jitter_stat(t), target, 0.1 * target);
  }
}

TEST(Jitter, Preconditions) {
  EXPECT_THROW(jitter_stat(std::vector<double>{0, 1}), DataError);
  EXPECT_THROW(jitter_stat(std::vector<double>{0, 1, 1}), DataError);
}

TEST(PairByTime, Examples) {
  const std::vector<double> a{0.0, 0.1, 0.2};
  const auto p = pair_by_time(a, std::vector<double>{0.06});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], (IndexPair{1, 0}));
  const auto tie = pair_by_time(std::vector<double>{0.0, 0.5}, std::vector<double>{0.25});
  EXPECT_EQ(tie[0].a, 0u);
  EXPECT_TRUE(pair_by_time(a, std::vector<double>{0.9}, 0.1).empty());
  EXPECT_TRUE(pair_by_time(std::vector<double>{}, std::vector<double>{0.9}).empty());
}

TEST(PairByTime, MatchesBruteForce) {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 100; ++k) {
    const auto a = sorted_series(rng, 1 + rng() % 200, 10);
    const auto b = sorted_series(rng, 1 + rng() % 200, 10);
    const double gap = k % 2 ? std::numeric_limits<double>::infinity() : 0.05;
    EXPECT_EQ(pair_by_time(a, b, gap), brute_pairs(a, b, gap));
  }
}

TEST(PairByTime, CoTriggeredStreamsPairExactly) {
  std::vector<double> eye, world;
  for (int i = 0; i < 600; ++i) eye.push_back(i / 120.0);
  for (int i = 0; i < 150; ++i) world.push_back(i / 30.0);
  for (const auto& p : pair_by_time(eye, world)) EXPECT_EQ(eye[p.a], world[p.b]);
}

TEST(Latency, FixedStagesAddUp) {
  const std::vector<StageDelay> stages{{0.010, 0}, {0.005, 0}, {0.003, 0}, {}, {}, {}, {}};
  const LatencyReport r = simulate_pipeline("eye", stages, 100, 1);
  EXPECT_NEAR(r.total_mean, 0.018, 1e-12);
  EXPECT_NEAR(r.total_sd, 0.0, 1e-12);
  EXPECT_EQ(r.samples, 100u);
  EXPECT_EQ(r.stages.size(), kStageCount);
  EXPECT_THROW(simulate_pipeline("eye", std::span(stages).first(3), 100, 1), DataError);
}

TEST(Latency, NoisySdMatchesVarianceSum) {
  const std::vector<StageDelay> stages{{0.020, 0.002}, {0.010, 0.001}, {0.015, 0.0015}, {}, {}, {}, {}};
  const LatencyReport r = simulate_pipeline("eye", stages, 1400, 9);
  const double expected = std::sqrt(0.002 * 0.002 + 0.001 * 0.001 + 0.0015 * 0.0015);
  EXPECT_NEAR(r.total_sd, expected, 0.15 * expected);
  EXPECT_NEAR(r.total_mean, 0.045, 0.001);
}

TEST(Latency, TotalsEqualStageSums) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> names{"a", "b", "c"};
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({test::uniform(rng, 0, 1), test::uniform(rng, 0, 1), test::uniform(rng, 0, 1)});
  const LatencyReport r = aggregate_latency("world", names, rows);
  double sum = 0;
  for (const auto& s : r.stages) sum += s.mean;
  EXPECT_NEAR(r.total_mean, sum, 1e-12);
  std::vector<double> totals;
  for (const auto& row : rows) totals.push_back(row[0] + row[1] + row[2]);
  EXPECT_NEAR(r.total_sd, sd(totals), 1e-12);
  EXPECT_THROW(aggregate_latency("x", names, std::span(rows).first(1)), DataError);
  EXPECT_FALSE(to_table(r).empty());
}

TEST(OrderedQueue, PreservesOrderAcrossThreads) {
  OrderedQueue<int> q;
  std::thread producer([&] {
    for (int i = 0; i < 1000; ++i) q.push(i);
    q.close();
  });
  int expected = 0;
  while (auto v = q.pop()) EXPECT_EQ(*v, expected++);
  producer.join();
  EXPECT_EQ(expected, 1000);
}

}  // namespace
}  // namespace gazekit
