#include "gazekit/error.hpp"
#include "gazekit/image.hpp"
#include "gazekit/recording.hpp"
#include "gazekit/synth.hpp"

#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace gazekit {

const char* to_string(Tier tier) {
  switch (tier) {
    case Tier::clean: return "clean";
    case Tier::noisy: return "noisy";
    case Tier::occluded: return "occluded";
  }
  return "?";
}

std::vector<BenchmarkFrame> benchmark_specs(const EyeSceneRig& rig, int frames) {
  if (frames < 1) throw DataError("benchmark needs at least one frame");
  rig.validate();
  std::mt19937_64 rng(mix_seed(rig.seed, 0xbe9c));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = rig.eye.width, h = rig.eye.height;
  // Sizes are drawn for a 640x480 sensor and scaled with the frame.
  const double scale = std::min(w / 640.0, h / 480.0);

  std::vector<BenchmarkFrame> out;
  out.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    BenchmarkFrame f;
    f.index = i;
    f.tier = static_cast<Tier>(i % 3);
    auto& s = f.spec;
    s.width = rig.eye.width;
    s.height = rig.eye.height;
    s.appearance = rig.appearance;
    s.timestamp = i / rig.eye_rate;
    s.noise_seed = mix_seed(rig.seed, static_cast<std::uint64_t>(i));
    const double a = scale * (25.0 + 30.0 * u(rng));
    const double b = a * (0.7 + 0.3 * u(rng));
    const double cx = w * (0.25 + 0.5 * u(rng));
    const double cy = h * (0.29 + 0.42 * u(rng));
    s.pupil = make_ellipse(Vec2(cx, cy), a, b, std::numbers::pi * u(rng));
    const double gr = rig.render.glint_radius;
    switch (f.tier) {
      case Tier::clean:
        s.noise_sd = 2.0;
        break;
      case Tier::noisy: {
        s.noise_sd = 8.0;
        const Vec2 off(u(rng) - 0.5, u(rng) - 0.5);
        s.glints.push_back({s.pupil.center + a * off, gr});
        break;
      }
      case Tier::occluded:
        s.noise_sd = 4.0;
        s.occlusion = 0.1 + 0.35 * u(rng);
        for (int g = 0; g < 2; ++g) {
          const Vec2 off(u(rng) - 0.5, u(rng) - 0.5);
          s.glints.push_back({s.pupil.center + 1.6 * a * off, gr});
        }
        break;
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::filesystem::path benchmark_frame_path(const std::filesystem::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "%06d.pgm", index);
  return dir / "frames" / name;
}

namespace {

const std::vector<std::string> kTruthHeader{"index", "tier", "timestamp", "center_x", "center_y", "a",
                                            "b",     "theta", "occlusion", "glints",  "noise_sd"};

}  // namespace

void generate_benchmark(const EyeSceneRig& rig, int frames, const std::filesystem::path& dir) {
  const auto specs = benchmark_specs(rig, frames);
  std::error_code ec;
  std::filesystem::create_directories(dir / "frames", ec);
  if (ec) throw IoError((dir / "frames").string(), "cannot create directory: " + ec.message());

  std::vector<std::vector<double>> rows;
  rows.reserve(specs.size());
  for (const auto& f : specs) {
    const auto r = render_eye_frame(f.spec);
    write_pgm(benchmark_frame_path(dir, f.index), r.frame);
    const auto& e = r.truth;
    rows.push_back({double(f.index), double(static_cast<int>(f.tier)), f.spec.timestamp, e.center.x(), e.center.y(),
                    e.a, e.b, e.theta, f.spec.occlusion, double(f.spec.glints.size()), f.spec.noise_sd});
  }
  write_numeric_csv(dir / "truth.csv", kTruthHeader, rows);
  const auto rig_path = dir / "rig.json";
  std::ofstream out(rig_path, std::ios::binary);
  if (!out) throw IoError(rig_path.string(), "cannot open for writing");
  out << to_json(rig) << '\n';
  if (!out) throw IoError(rig_path.string(), "write failed");
}

std::vector<BenchmarkTruth> read_benchmark_truth(const std::filesystem::path& dir) {
  const auto table = read_numeric_csv(dir / "truth.csv", kTruthHeader);
  std::vector<BenchmarkTruth> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const int tier = static_cast<int>(r[1]);
    if (tier < 0 || tier > 2 || r[1] != tier)
      throw ParseError((dir / "truth.csv").string(), i + 2, "invalid tier");
    BenchmarkTruth t;
    t.index = static_cast<int>(r[0]);
    t.tier = static_cast<Tier>(tier);
    t.timestamp = r[2];
    t.ellipse = make_ellipse(Vec2(r[3], r[4]), r[5], r[6], r[7]);
    t.occlusion = r[8];
    t.glints = static_cast<int>(r[9]);
    t.noise_sd = r[10];
    out.push_back(t);
  }
  return out;
}

}  // namespace gazekit
