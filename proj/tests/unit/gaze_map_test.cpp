#include "gazekit/error.hpp"
#include "gazekit/gaze_map.hpp"
#include "gazekit/synth.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gazekit {
namespace {

// Ground-truth quadratic, written out term by term.
Vec2 quad(const Vec2& p) {
  const double x = p.x(), y = p.y();
  return {0.1 + 0.8 * x - 0.05 * y + 0.3 * x * x + 0.2 * x * y - 0.1 * y * y,
          -0.05 + 0.1 * x + 0.9 * y - 0.15 * x * x + 0.25 * x * y + 0.05 * y * y};
}

std::vector<CalibrationPair> grid_pairs(int n, auto&& f) {
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vec2 p(0.2 + 0.6 * i / (n - 1), 0.25 + 0.5 * j / (n - 1));
      pairs.push_back({p, f(p), 0.0});
    }
  return pairs;
}

TEST(Monomials, Order) {
  const Eigen::VectorXd m = monomials({2, 3}, 2);
  ASSERT_EQ(m.size(), 6);
  EXPECT_EQ(m[0], 1);
  EXPECT_EQ(m[1], 2);
  EXPECT_EQ(m[2], 3);
  EXPECT_EQ(m[3], 4);
  EXPECT_EQ(m[4], 6);
  EXPECT_EQ(m[5], 9);
  EXPECT_EQ(monomial_count(3), 10);
}

TEST(Calibrate, IdentityDegreeOne) {
  const auto pairs = grid_pairs(3, [](const Vec2& p) { return p; });
  const CalibrationModel m = calibrate(pairs, 1);
  ASSERT_EQ(m.coeffs_x.size(), 3);
  EXPECT_NEAR(m.coeffs_x[0], 0, 1e-12);
  EXPECT_NEAR(m.coeffs_x[1], 1, 1e-12);
  EXPECT_NEAR(m.coeffs_x[2], 0, 1e-12);
  EXPECT_NEAR(m.coeffs_y[0], 0, 1e-12);
  EXPECT_NEAR(m.coeffs_y[1], 0, 1e-12);
  EXPECT_NEAR(m.coeffs_y[2], 1, 1e-12);
  EXPECT_NEAR(m.rms_residual, 0, 1e-12);
}

TEST(Calibrate, ExactQuadratic) {
  const CalibrationModel m = calibrate(grid_pairs(3, quad), 2);
  const double cx[] = {0.1, 0.8, -0.05, 0.3, 0.2, -0.1};
  const double cy[] = {-0.05, 0.1, 0.9, -0.15, 0.25, 0.05};
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(m.coeffs_x[i], cx[i], 1e-9);
    EXPECT_NEAR(m.coeffs_y[i], cy[i], 1e-9);
  }
  EXPECT_LT(m.rms_residual, 1e-12);

  PupilDatum p;
  std::mt19937_64 rng(8);
  for (int k = 0; k < 100; ++k) {
    p.norm_pos = Vec2(test::uniform(rng, 0, 1), test::uniform(rng, 0, 1));
    p.confidence = 0.8;
    p.timestamp = k;
    const GazeDatum g = map_gaze(p, m);
    EXPECT_NEAR((g.norm_pos - quad(p.norm_pos)).norm(), 0.0, 1e-12);
    EXPECT_EQ(g.timestamp, p.timestamp);
    EXPECT_EQ(g.base.confidence, 0.8);
  }
}

TEST(Calibrate, Preconditions) {
  auto pairs = grid_pairs(3, quad);
  pairs.resize(5);
  EXPECT_THROW(calibrate(pairs, 2), DataError);
  EXPECT_THROW(calibrate(grid_pairs(3, quad), 0), DataError);
  // All pupils on one line: the quadratic design matrix is rank deficient.
  std::vector<CalibrationPair> line;
  for (int i = 0; i < 10; ++i) line.push_back({{0.1 * i, 0.5}, {0.1 * i, 0.5}, 0});
  EXPECT_THROW(calibrate(line, 2), DegenerateError);
}

TEST(Calibrate, HigherDegreeNeverWorse) {
  std::mt19937_64 rng(17);
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 60; ++i) {
    const Vec2 p(test::uniform(rng, 0.1, 0.9), test::uniform(rng, 0.1, 0.9));
    pairs.push_back({p, quad(p) + Vec2(std::sin(9 * p.x()), std::cos(7 * p.y())) * 0.02, 0});
  }
  double prev = 1e9;
  for (int d = 1; d <= 4; ++d) {
    const double rms = calibrate(pairs, d).rms_residual;
    EXPECT_LE(rms, prev + 1e-15) << "degree " << d;
    prev = rms;
  }
}

TEST(MapGaze, IdentityAndFlags) {
  PupilDatum p;
  p.norm_pos = {0.5, 0.5};
  const GazeDatum g = map_gaze(p, CalibrationModel::identity());
  EXPECT_EQ(g.norm_pos, Vec2(0.5, 0.5));
  EXPECT_FALSE(g.out_of_frame);
  p.norm_pos = {1.2, 0.5};
  EXPECT_TRUE(map_gaze(p, CalibrationModel::identity()).out_of_frame);
}

TEST(MapGaze, LipschitzBound) {
  const CalibrationModel m = calibrate(grid_pairs(4, quad), 3);
  const double L = m.lipschitz_bound();
  std::mt19937_64 rng(2);
  for (int k = 0; k < 500; ++k) {
    const Vec2 p(test::uniform(rng, 0, 1), test::uniform(rng, 0, 1));
    const Vec2 q(test::uniform(rng, 0, 1), test::uniform(rng, 0, 1));
    EXPECT_LE((m.evaluate(p) - m.evaluate(q)).norm(), L * (p - q).norm() + 1e-12);
  }
}

TEST(CalibrationFile, RoundTrip) {
  const CalibrationModel m = calibrate(grid_pairs(3, quad), 2);
  const CalibrationModel back = calibration_from_json(to_json(m));
  EXPECT_EQ(back.degree, 2);
  EXPECT_EQ(back.coeffs_x, m.coeffs_x);
  EXPECT_EQ(back.coeffs_y, m.coeffs_y);
  EXPECT_THROW(calibration_from_json(R"({"degree":2,"coeffs_x":[1,2],"coeffs_y":[1,2]})"), DataError);
}

TEST(ScreenMarker, PerfectSessionClusters) {
  const SimulatedSession s = simulate_session(EyeSceneRig::standard(3), {});
  const auto pairs = screen_marker_session(s.calibration_sites, s.pupils, s.markers);
  for (const MarkerSite& site : s.calibration_sites) {
    Vec2 sum = Vec2::Zero();
    int n = 0;
    for (const auto& p : pairs)
      if (p.timestamp >= site.start && p.timestamp < site.end) {
        sum += p.target;
        ++n;
      }
    ASSERT_GT(n, 0) << "site " << site.index;
    EXPECT_NEAR((sum / n - site.target).norm(), 0.0, 1e-6);
  }
}

TEST(ScreenMarker, BlindSiteIsReported) {
  SimulatedSession s = simulate_session(EyeSceneRig::standard(3), {});
  const MarkerSite& site = s.calibration_sites[4];
  for (auto& p : s.pupils)
    if (p.timestamp >= site.start - 0.05 && p.timestamp < site.end + 0.05) p.confidence = 0;
  try {
    screen_marker_session(s.calibration_sites, s.pupils, s.markers);
    FAIL() << "expected a DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
  }
}

TEST(ScreenMarker, JitteredPairingMatchesBruteForce) {
  std::mt19937_64 rng(5);
  const auto sites = nine_point_schedule(0.5, 1.0);
  std::vector<PupilDatum> pupils;
  for (int i = 0; i < 700; ++i) {
    PupilDatum p;
    p.timestamp = i / 60.0 + test::uniform(rng, -0.002, 0.002);
    p.confidence = 1.0;
    p.norm_pos = Vec2(i, 0);  // identifies the datum
    pupils.push_back(p);
  }
  std::vector<MarkerObservation> markers;
  for (int i = 0; i < 330; ++i) markers.push_back({i / 30.0 + test::uniform(rng, -0.002, 0.002), Vec2(i, 0)});
  ScreenMarkerOptions opt;
  opt.max_gap = 1.0;
  const auto pairs = screen_marker_session(sites, pupils, markers, opt);
  ASSERT_FALSE(pairs.empty());
  for (const auto& cp : pairs) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < pupils.size(); ++k)
      if (std::abs(pupils[k].timestamp - cp.timestamp) < std::abs(pupils[best].timestamp - cp.timestamp)) best = k;
    EXPECT_EQ(cp.pupil.x(), static_cast<double>(best));
    const double t = cp.timestamp;
    bool settled = false;
    for (const auto& s : sites) settled |= t >= s.start + 0.3 && t < s.end;
    EXPECT_TRUE(settled);
  }
}

TEST(ConcentricMarker, RenderedCenter) {
  SceneSpec spec;
  spec.width = 400;
  spec.height = 300;
  spec.concentric = ConcentricMarkerSpec{{200, 150}, 40, MarkerKind::collect};
  const auto m = detect_concentric_marker(render_scene_frame(spec).frame);
  ASSERT_TRUE(m.has_value());
  EXPECT_LE((m->center - Vec2(200, 150)).norm(), 0.5);
  EXPECT_EQ(m->kind, MarkerKind::collect);

  spec.concentric->center = {133.4, 171.7};
  const auto off = detect_concentric_marker(render_scene_frame(spec).frame);
  ASSERT_TRUE(off.has_value());
  EXPECT_LE((off->center - Vec2(133.4, 171.7)).norm(), 0.5);
}

TEST(ConcentricMarker, BlankAndStop) {
  SceneSpec spec;
  spec.width = 400;
  spec.height = 300;
  EXPECT_FALSE(detect_concentric_marker(render_scene_frame(spec).frame).has_value());
  spec.concentric = ConcentricMarkerSpec{{180, 140}, 40, MarkerKind::stop};
  const auto m = detect_concentric_marker(render_scene_frame(spec).frame);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->kind, MarkerKind::stop);
}

}  // namespace
}  // namespace gazekit
