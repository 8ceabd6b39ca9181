#include "gazekit/pupil_detect.hpp"
#include "gazekit/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace gazekit;

GrayFrame eye_frame(double noise, int glints, double occlusion) {
  EyeFrameSpec s;
  s.pupil = make_ellipse({318.4, 251.7}, 42, 35, 0.6);
  s.noise_sd = noise;
  s.noise_seed = 5;
  s.occlusion = occlusion;
  for (int i = 0; i < glints; ++i) s.glints.push_back({{305.0 + 12 * i, 240.0}, 3});
  return render_eye_frame(s).frame;
}

void BM_DetectClean(benchmark::State& state) {
  const GrayFrame f = eye_frame(0, 0, 0);
  const DetectorParams p;
  for (auto _ : state) benchmark::DoNotOptimize(detect(f, p));
}
BENCHMARK(BM_DetectClean)->Unit(benchmark::kMillisecond);

void BM_DetectOccludedGlints(benchmark::State& state) {
  const GrayFrame f = eye_frame(4, 2, 0.35);
  const DetectorParams p;
  for (auto _ : state) benchmark::DoNotOptimize(detect(f, p));
}
BENCHMARK(BM_DetectOccludedGlints)->Unit(benchmark::kMillisecond);

void BM_CoarseRegion(benchmark::State& state) {
  const GrayFrame f = eye_frame(2, 0, 0);
  const DetectorParams p;
  for (auto _ : state) benchmark::DoNotOptimize(coarse_pupil_region(f, p));
}
BENCHMARK(BM_CoarseRegion)->Unit(benchmark::kMillisecond);

void BM_Canny(benchmark::State& state) {
  const GrayFrame f = crop(eye_frame(2, 0, 0), {218, 151, 201, 201});
  const DetectorParams p;
  for (auto _ : state) benchmark::DoNotOptimize(canny_edges(f, p));
}
BENCHMARK(BM_Canny)->Unit(benchmark::kMicrosecond);

void BM_RenderEyeFrame(benchmark::State& state) {
  EyeFrameSpec s;
  s.pupil = make_ellipse({320, 240}, 40, 33, 0.2);
  s.noise_sd = 4;
  for (auto _ : state) benchmark::DoNotOptimize(render_eye_frame(s));
}
BENCHMARK(BM_RenderEyeFrame)->Unit(benchmark::kMillisecond);

}  // namespace
