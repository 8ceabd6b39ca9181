#include "gazekit/error.hpp"
#include "gazekit/eval.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace gazekit {
namespace {

constexpr double kPi = std::numbers::pi;

AngularPair at(double deg) {
  AngularPair p;
  p.distance = deg;
  return p;
}

// Dense point-set Hausdorff distance.
double brute_hausdorff(const Ellipse& e1, const Ellipse& e2, int n) {
  std::vector<Vec2> p1, p2;
  for (int i = 0; i < n; ++i) {
    p1.push_back(e1.point_at(2 * kPi * i / n));
    p2.push_back(e2.point_at(2 * kPi * i / n));
  }
  const auto directed = [](const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    double worst = 0;
    for (const Vec2& p : a) {
      double best = 1e300;
      for (const Vec2& q : b) best = std::min(best, (p - q).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(p1, p2), directed(p2, p1));
}

TEST(Outliers, StrictLimit) {
  const std::vector<AngularPair> pairs{at(5.0), at(6.0), at(0.0), at(5.0000001)};
  const OutlierSplit s = filter_outliers(pairs);
  ASSERT_EQ(s.kept.size(), 2u);
  EXPECT_EQ(s.kept[0].distance, 5.0);
  EXPECT_EQ(s.kept[1].distance, 0.0);
  ASSERT_EQ(s.discarded.size(), 2u);
  EXPECT_EQ(s.discarded[0].distance, 6.0);

  const std::vector<AngularPair> zeros(10, at(0.0));
  EXPECT_TRUE(filter_outliers(zeros).discarded.empty());
}

TEST(Accuracy, Means) {
  EXPECT_EQ(accuracy(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_NEAR(accuracy(std::vector<double>{0.4, 0.8}), 0.6, 1e-15);
  EXPECT_NEAR(accuracy(std::vector<AngularPair>{at(1.0), at(2.0)}), 1.5, 1e-15);
  EXPECT_THROW(accuracy(std::vector<double>{}), DataError);
}

TEST(Precision, ConstantAndAlternating) {
  const CameraIntrinsics scene{1280, 720, 90};
  const std::vector<std::vector<Vec2>> still{std::vector<Vec2>(20, Vec2(0.4, 0.4))};
  EXPECT_EQ(precision(still, scene).pooled, 0.0);

  // Two points 0.1 degree apart horizontally.
  const double dx = 0.1 * scene.px_per_degree() / scene.width;
  std::vector<Vec2> alt;
  for (int i = 0; i < 30; ++i) alt.emplace_back(0.5 + (i % 2) * dx, 0.5);
  const std::vector<std::vector<Vec2>> windows{alt};
  const PrecisionResult r = precision(windows, scene);
  EXPECT_NEAR(r.pooled, 0.1, 1e-9);
  EXPECT_NEAR(r.mean_per_window, 0.1, 1e-9);
  EXPECT_EQ(r.distances, 29u);
}

TEST(Precision, GaussianJitterMonteCarlo) {
  const double sigma = 0.2;
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> x, y;
  for (int i = 0; i < 100000; ++i) {
    x.push_back(n(rng));
    y.push_back(n(rng));
  }
  // Oracle: empirical RMS of successive steps, accumulated independently.
  double sq = 0;
  std::vector<double> steps;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = std::hypot(x[i] - x[i - 1], y[i] - y[i - 1]);
    sq += d * d;
    steps.push_back(d);
  }
  const double oracle = std::sqrt(sq / steps.size());
  const std::vector<std::vector<double>> windows{steps};
  const double got = precision(windows).pooled;
  EXPECT_NEAR(got, oracle, 0.05 * oracle);
  EXPECT_NEAR(got, 2 * sigma, 0.05 * 2 * sigma);
}

TEST(Precision, SkipsShortWindows) {
  const std::vector<std::vector<double>> windows{{}, {0.2, 0.2}, {}};
  const PrecisionResult r = precision(windows);
  EXPECT_EQ(r.windows_used, 1u);
  EXPECT_TRUE(std::isnan(r.per_window[0]));
  EXPECT_THROW(precision(std::vector<std::vector<double>>{{}, {}}), DataError);
}

TEST(Hausdorff, Examples) {
  const Ellipse e{{10, 20}, 8, 5, 0.4};
  EXPECT_EQ(ellipse_hausdorff(e, e), 0.0);
  EXPECT_NEAR(ellipse_hausdorff({{0, 0}, 10, 10, 0}, {{0, 0}, 12, 12, 0}), 2.0, 1e-9);
  for (const double shift : {16.0, 25.0, 40.0}) {
    Ellipse moved = e;
    moved.center += Vec2(shift, 0.3 * shift);
    const double oracle = brute_hausdorff(e, moved, 10000);
    EXPECT_NEAR(ellipse_hausdorff(e, moved), oracle, 0.01 * oracle) << "shift " << shift;
  }
}

TEST(Hausdorff, SmallPerturbationsAgreeWithBruteForce) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    const Ellipse a = make_ellipse({0, 0}, 40, 30, test::uniform(rng, 0, kPi));
    const Ellipse b = make_ellipse({test::uniform(rng, -2, 2), test::uniform(rng, -2, 2)},
                                   40 + test::uniform(rng, -3, 3), 30 + test::uniform(rng, -3, 3),
                                   a.theta + test::uniform(rng, -0.1, 0.1));
    const double oracle = brute_hausdorff(a, b, 4000);
    EXPECT_NEAR(ellipse_hausdorff(a, b), oracle, 0.01 * oracle + 0.02);
  }
}

TEST(DetectionCurve, CountingExamples) {
  const auto th = default_thresholds();
  ASSERT_EQ(th.size(), 21u);
  EXPECT_EQ(th.front(), 0.0);
  EXPECT_EQ(th.back(), 10.0);

  const Ellipse e{{50, 50}, 20, 15, 0.2};
  const std::vector<DetectionOutcome> exact(8, DetectionOutcome{e, e});
  for (double r : detection_rate_curve(exact, th).rates) EXPECT_EQ(r, 1.0);

  std::vector<std::optional<double>> half;
  for (int i = 0; i < 10; ++i) half.push_back(i % 2 ? std::optional<double>(3.0) : std::nullopt);
  const DetectionRateCurve c = detection_rate_curve(half, th);
  EXPECT_EQ(c.rate_at(2.0), 0.0);
  EXPECT_EQ(c.rate_at(5.0), 0.5);
  EXPECT_THROW(c.rate_at(2.25), DataError);
  EXPECT_THROW(detection_rate_curve(std::vector<std::optional<double>>{}, th), DataError);
  EXPECT_EQ(curve_csv(c).substr(0, 15), "threshold,rate\n");
}

TEST(Session, NoiselessRig) {
  const AccuracyReport r = run_accuracy_session(EyeSceneRig::standard(1));
  EXPECT_LT(r.accuracy, 0.05);
  EXPECT_NEAR(r.precision, 0.0, 1e-9);
  EXPECT_EQ(r.n_discarded, 0u);
  EXPECT_GT(r.n_used, 100u);
  EXPECT_TRUE(r.sites_without_pairs.empty());
}

TEST(Session, PupilNoise) {
  EyeSceneRig rig = EyeSceneRig::standard(2);
  rig.session.pupil_noise_px = 2.0;
  const AccuracyReport r = run_accuracy_session(rig);
  EXPECT_LE(r.accuracy, 0.6);
  EXPECT_LE(r.precision, 0.1);
  EXPECT_GT(r.precision, 0.0);
}

TEST(Session, OccludedSite) {
  const EyeSceneRig rig = EyeSceneRig::standard(4);
  const AccuracyReport full = run_accuracy_session(rig);
  SessionProtocol protocol;
  protocol.occluded_sites = {2};
  const AccuracyReport r = run_accuracy_session(rig, protocol);
  ASSERT_EQ(r.sites_without_pairs.size(), 1u);
  EXPECT_EQ(r.sites_without_pairs[0], 2);
  EXPECT_LT(r.n_used, full.n_used);
  for (const auto& p : r.pairs) EXPECT_NE(p.site, 2);
  EXPECT_FALSE(to_table(r).empty());
}

TEST(Session, InvariantUnderSceneTranslation) {
  const CameraIntrinsics scene{1280, 720, 90};
  std::mt19937_64 rng(14);
  std::vector<Vec2> w;
  for (int i = 0; i < 50; ++i) w.emplace_back(test::uniform(rng, 0.4, 0.5), test::uniform(rng, 0.4, 0.5));
  std::vector<Vec2> shifted = w;
  for (auto& p : shifted) p += Vec2(0.25, -0.125);
  const std::vector<std::vector<Vec2>> a{w}, b{shifted};
  EXPECT_NEAR(precision(a, scene).pooled, precision(b, scene).pooled, 1e-12);
}

}  // namespace
}  // namespace gazekit
