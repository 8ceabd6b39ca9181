#include "gazekit/ellipse.hpp"
#include "gazekit/eval.hpp"
#include "gazekit/homography.hpp"

#include <benchmark/benchmark.h>

#include <numbers>
#include <vector>

namespace {

using namespace gazekit;

std::vector<Vec2> ellipse_points(int n) {
  const Ellipse e{{320, 240}, 40, 28, 0.7};
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back(e.point_at(2 * std::numbers::pi * i / n));
  return pts;
}

void BM_FitEllipse(benchmark::State& state) {
  const auto pts = ellipse_points(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_ellipse(pts));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitEllipse)->RangeMultiplier(4)->Range(8, 2048)->Complexity();

void BM_PointEllipseDistance(benchmark::State& state) {
  const Ellipse e{{0, 0}, 40, 28, 0.7};
  double x = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(point_ellipse_distance(e, {x, 13.0}));
    x = x > 80 ? -80 : x + 0.37;
  }
}
BENCHMARK(BM_PointEllipseDistance);

void BM_Hausdorff(benchmark::State& state) {
  const Ellipse a{{0, 0}, 40, 28, 0.7}, b{{1.5, -0.7}, 41, 27, 0.75};
  for (auto _ : state) benchmark::DoNotOptimize(ellipse_hausdorff(a, b));
}
BENCHMARK(BM_Hausdorff)->Unit(benchmark::kMicrosecond);

void BM_EstimateHomography(benchmark::State& state) {
  std::vector<Vec2> src, dst;
  for (int i = 0; i < state.range(0); ++i) {
    src.emplace_back(i % 7 * 10.0 + (i * i) % 5, i / 7 * 10.0 + i % 3 * 1.7);
    dst.push_back(Vec2(src.back().x() * 1.1 + 3, src.back().y() * 0.9 - 2) / (1 + 0.001 * src.back().x()));
  }
  for (auto _ : state) benchmark::DoNotOptimize(estimate_homography(src, dst));
}
BENCHMARK(BM_EstimateHomography)->Arg(4)->Arg(16)->Arg(64);

}  // namespace
