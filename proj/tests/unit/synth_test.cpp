#include "gazekit/error.hpp"
#include "gazekit/eval.hpp"
#include "gazekit/gaze_map.hpp"
#include "gazekit/image.hpp"
#include "gazekit/pupil_detect.hpp"
#include "gazekit/surface.hpp"
#include "gazekit/synth.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include <fstream>
#include <sstream>

namespace gazekit {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(MixSeed, DistinctStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t k = 0; k < 8; ++k) seen.insert(mix_seed(s, k));
  EXPECT_EQ(seen.size(), 32u);
  EXPECT_EQ(mix_seed(5, 3), mix_seed(5, 3));
}

TEST(EyeRender, NoiselessPathIsDetected) {
  const EyeSceneRig rig = EyeSceneRig::standard(7);
  for (double t : {0.0, 1.3, 2.9, 4.4}) {
    const EyeRender r = render_eye_frame(rig, t);
    EXPECT_EQ(r.frame.timestamp(), t);
    const Detection d = detect(r.frame, {});
    ASSERT_TRUE(d.pupil.has_value()) << "t = " << t;
    EXPECT_LE((d.pupil->ellipse.center - r.truth.center).norm(), 1.0);
  }
}

TEST(EyeRender, HalfOccludedConfidence) {
  EyeFrameSpec s;
  s.pupil = make_ellipse({320, 240}, 40, 36, 0.2);
  s.occlusion = 0.5;
  const Detection d = detect(render_eye_frame(s).frame, {});
  EXPECT_GE(d.best_confidence, 0.3);
  EXPECT_LE(d.best_confidence, 0.7);
}

TEST(EyeRender, Deterministic) {
  EyeSceneRig rig = EyeSceneRig::standard(9);
  rig.render.pixel_noise_sd = 5;
  rig.render.glint_count = 2;
  EXPECT_EQ(render_eye_frame(rig, 1.25).frame, render_eye_frame(rig, 1.25).frame);
  EXPECT_THROW(render_eye_frame(EyeFrameSpec{.pupil = {{0, 0}, 1, 2, 0}}), DataError);
}

TEST(EyeRender, ForeshorteningShrinksMinorAxis) {
  const Ellipse round = foreshortened_pupil({100, 100}, 30, Vec2::Zero(), 8);
  EXPECT_DOUBLE_EQ(round.a, round.b);
  const Ellipse tilted = foreshortened_pupil({100, 100}, 30, Vec2(80, 0), 8);
  EXPECT_NEAR(tilted.b, 30 * std::cos(10 * std::numbers::pi / 180), 1e-12);
  EXPECT_NEAR(std::abs(std::cos(tilted.theta)), 0.0, 1e-12);  // minor axis along the offset
}

TEST(Rig, PupilForTargetInvertsTruth) {
  const EyeSceneRig rig = EyeSceneRig::standard();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Vec2 target(test::uniform(rng, 0.05, 0.95), test::uniform(rng, 0.05, 0.95));
    EXPECT_NEAR((rig.gaze_truth.evaluate(rig.pupil_for_target(target)) - target).norm(), 0.0, 1e-10);
  }
  EXPECT_THROW(rig.pupil_for_target({40, -40}), DataError);
}

TEST(Rig, JsonRoundTrip) {
  EyeSceneRig rig = EyeSceneRig::standard(42);
  rig.session.pupil_noise_px = 1.5;
  rig.render.glint_count = 3;
  rig.eye_clock = ClockModel::software_eye();
  const EyeSceneRig back = rig_from_json(to_json(rig));
  EXPECT_EQ(to_json(back), to_json(rig));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(rig_from_json(R"({"seed":5})").scene.width, 1280);
  EXPECT_THROW(rig_from_json(R"({"eye_rate":-1})"), DataError);
}

TEST(SceneRender, NinePointScript) {
  const EyeSceneRig rig = EyeSceneRig::standard();
  for (const MarkerSite& s : nine_point_schedule(0, 1)) {
    const SceneRender r = render_scene_frame(rig, s.target, s.start);
    const auto m = detect_concentric_marker(r.frame);
    ASSERT_TRUE(m.has_value()) << "site " << s.index;
    EXPECT_LE((m->center - pixel_from_norm(s.target, 1280, 720)).norm(), 0.5);
    ASSERT_TRUE(r.truth.concentric_center.has_value());
  }
}

TEST(SceneRender, BlankScene) {
  const SceneRender r = render_scene_frame(SceneSpec{});
  EXPECT_FALSE(detect_concentric_marker(r.frame).has_value());
  EXPECT_TRUE(detect_markers(r.frame).empty());
  EXPECT_TRUE(r.truth.markers.empty());
}

TEST(SceneRender, FiducialTruthMatchesDetection) {
  SceneSpec spec;
  Eigen::Matrix3d place;
  place << 600, -40, 320, 30, 420, 140, 0.03, -0.04, 1;
  spec.surfaces = {{corner_marker_surface("desk", {10, 11, 12, 13}), Homography(place)}};
  const SceneRender r = render_scene_frame(spec);
  ASSERT_EQ(r.truth.markers.size(), 4u);
  const auto found = detect_markers(r.frame);
  ASSERT_EQ(found.size(), 4u);
  for (const Marker& t : r.truth.markers)
    for (const Marker& f : found)
      if (f.id == t.id)
        for (int i = 0; i < 4; ++i) EXPECT_LE((f.corners[i] - t.corners[i]).norm(), 1.0);
}

TEST(Benchmark, CountsAndRegeneration) {
  test::TempDir a, b;
  const EyeSceneRig rig = EyeSceneRig::standard(11);
  generate_benchmark(rig, 500, a.path());
  std::size_t frames = 0;
  for (const auto& e : std::filesystem::directory_iterator(a / "frames")) frames += e.path().extension() == ".pgm";
  EXPECT_EQ(frames, 500u);
  const auto truth = read_benchmark_truth(a.path());
  ASSERT_EQ(truth.size(), 500u);
  std::set<Tier> tiers;
  for (const auto& t : truth) tiers.insert(t.tier);
  EXPECT_EQ(tiers.size(), 3u);

  generate_benchmark(rig, 500, b.path());
  EXPECT_EQ(slurp(a / "truth.csv"), slurp(b / "truth.csv"));
  for (int i : {0, 1, 2, 137, 499})
    EXPECT_EQ(slurp(benchmark_frame_path(a.path(), i)), slurp(benchmark_frame_path(b.path(), i)));
}

TEST(Benchmark, TruthRoundTrip) {
  test::TempDir dir;
  const EyeSceneRig rig = EyeSceneRig::standard(12);
  generate_benchmark(rig, 30, dir.path());
  const auto truth = read_benchmark_truth(dir.path());
  const auto specs = benchmark_specs(rig, 30);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    EXPECT_LE((truth[i].ellipse.center - specs[i].spec.pupil.center).norm(), 0.5);
    if (truth[i].tier != Tier::clean) continue;
    // Re-render the recorded ellipse and locate it again.
    EyeFrameSpec s;
    s.pupil = truth[i].ellipse;
    const Detection d = detect(render_eye_frame(s).frame, {});
    ASSERT_TRUE(d.pupil.has_value());
    EXPECT_LE((d.pupil->ellipse.center - truth[i].ellipse.center).norm(), 0.5);
    const GrayFrame a = read_pgm(benchmark_frame_path(dir.path(), static_cast<int>(i)));
    const GrayFrame b = render_eye_frame(specs[i].spec).frame;
    EXPECT_TRUE(std::ranges::equal(a.pixels(), b.pixels())) << "frame " << i;
  }
}

TEST(Session, SeededStreamsRepeat) {
  EyeSceneRig rig = EyeSceneRig::standard(21);
  rig.session.pupil_noise_px = 1;
  rig.session.blink_rate = 0.3;
  rig.eye_clock = ClockModel::software_eye();
  const SimulatedSession a = simulate_session(rig, {});
  const SimulatedSession b = simulate_session(rig, {});
  ASSERT_EQ(a.pupils.size(), b.pupils.size());
  for (std::size_t i = 0; i < a.pupils.size(); ++i) {
    EXPECT_EQ(a.pupils[i].timestamp, b.pupils[i].timestamp);
    EXPECT_EQ(a.pupils[i].norm_pos, b.pupils[i].norm_pos);
    EXPECT_EQ(a.pupils[i].confidence, b.pupils[i].confidence);
  }
  EXPECT_EQ(a.scene_timestamps, b.scene_timestamps);
}

TEST(Session, SaveLoadRoundTrip) {
  const SimulatedSession s = simulate_session(EyeSceneRig::standard(5), {});
  test::TempDir dir;
  save_session(dir.path(), s);
  const SimulatedSession back = load_session(dir.path());
  ASSERT_EQ(back.pupils.size(), s.pupils.size());
  EXPECT_EQ(back.markers.size(), s.markers.size());
  EXPECT_EQ(back.test_sites.size(), s.test_sites.size());
  const AccuracyReport r1 = evaluate_session(s), r2 = evaluate_session(back);
  EXPECT_NEAR(r1.accuracy, r2.accuracy, 1e-9);
}

TEST(Session, BlinkAtSiteThree) {
  const EyeSceneRig rig = EyeSceneRig::standard(6);
  const SimulatedSession plain = simulate_session(rig, {});
  const MarkerSite& site = plain.test_sites[3];
  const double duration = 0.3;
  SessionProtocol protocol;
  protocol.injected_blinks = {{site.start + 0.6, duration}};
  const AccuracyReport before = evaluate_session(plain);
  const AccuracyReport after = run_accuracy_session(rig, protocol);
  const double expected = duration * rig.scene_rate;
  const double lost = static_cast<double>(before.sites[3].n_used) - static_cast<double>(after.sites[3].n_used);
  EXPECT_NEAR(lost, expected, 1.0);
  for (std::size_t k = 0; k < before.sites.size(); ++k)
    if (k != 3) EXPECT_EQ(before.sites[k].n_used, after.sites[k].n_used);
}

}  // namespace
}  // namespace gazekit
