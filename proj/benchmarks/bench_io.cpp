#include "gazekit/bus.hpp"
#include "gazekit/recording.hpp"
#include "gazekit/timing.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

namespace {

using namespace gazekit;

void BM_PairByTime(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> eye(n), world(n / 4);
  for (std::size_t i = 0; i < eye.size(); ++i) eye[i] = i / 120.0;
  for (std::size_t i = 0; i < world.size(); ++i) world[i] = i / 30.0 + 0.004;
  for (auto _ : state) benchmark::DoNotOptimize(pair_by_time(eye, world, kDefaultMaxGap));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_PairByTime)->Arg(1 << 10)->Arg(1 << 16);

void BM_BusPublish(benchmark::State& state) {
  Bus bus;
  std::vector<std::shared_ptr<Subscription>> subs;
  for (int i = 0; i < state.range(0); ++i) subs.push_back(bus.subscribe(""));
  const std::string payload = R"({"norm_pos":[0.5,0.5],"confidence":0.9,"timestamp":1.0})";
  for (auto _ : state) bus.publish("gaze", payload);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BusPublish)->Arg(1)->Arg(4);

void BM_FormatRow(benchmark::State& state) {
  const RecordRow row{0.585903, 0.344576, 0.538961, 0.473854, 0.139290, 0.97686};
  for (auto _ : state) benchmark::DoNotOptimize(format_row(row));
}
BENCHMARK(BM_FormatRow);

void BM_ParseRow(benchmark::State& state) {
  const std::string line = "0.585903,0.344576,0.538961,0.473854,0.139290,0.97686";
  for (auto _ : state) benchmark::DoNotOptimize(parse_row(line));
}
BENCHMARK(BM_ParseRow);

void BM_EncodeDecodeFrame(benchmark::State& state) {
  const Message m{"gaze", R"({"seq":1,"norm_pos":[0.5,0.5]})", 1};
  std::size_t used = 0;
  for (auto _ : state) benchmark::DoNotOptimize(decode_frame(encode_frame(m), used));
}
BENCHMARK(BM_EncodeDecodeFrame);

}  // namespace
