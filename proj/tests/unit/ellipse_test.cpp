#include "gazekit/ellipse.hpp"
#include "gazekit/error.hpp"
#include "support.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace gazekit {
namespace {

constexpr double kPi = std::numbers::pi;

double perimeter_quadrature(double a, double b) {
  const double e2 = 1.0 - (b * b) / (a * a);
  auto f = [e2](double t) { return std::sqrt(1.0 - e2 * std::sin(t) * std::sin(t)); };
  return 4.0 * a * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, kPi / 2, 15, 1e-14);
}

std::vector<Vec2> sample(const Ellipse& e, int n, double t0 = 0.0, double span = 2 * kPi) {
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back(e.point_at(t0 + span * i / n));
  return pts;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

TEST(FitEllipse, RecoversExactParameters) {
  const Ellipse truth{{50, 40}, 20, 10, 30.0 * kPi / 180};
  const Ellipse fit = fit_ellipse(sample(truth, 20));
  EXPECT_LT(rel(fit.center.x(), 50), 1e-6);
  EXPECT_LT(rel(fit.center.y(), 40), 1e-6);
  EXPECT_LT(rel(fit.a, 20), 1e-6);
  EXPECT_LT(rel(fit.b, 10), 1e-6);
  EXPECT_LT(rel(fit.theta, truth.theta), 1e-6);
}

TEST(FitEllipse, Circle) {
  const Ellipse c{{-3, 7}, 12.5, 12.5, 0};
  const Ellipse fit = fit_ellipse(sample(c, 17));
  EXPECT_NEAR(fit.a, 12.5, 1e-9);
  EXPECT_NEAR(fit.b, 12.5, 1e-9);
}

TEST(FitEllipse, PartialArc) {
  const Ellipse truth{{300, 200}, 45, 30, 1.1};
  const Ellipse fit = fit_ellipse(sample(truth, 30, 0.3, kPi / 2));
  EXPECT_NEAR(fit.center.x(), 300, 1e-6);
  EXPECT_NEAR(fit.a, 45, 1e-6);
}

TEST(FitEllipse, Degenerate) {
  std::vector<Vec2> line;
  for (int i = 0; i < 5; ++i) line.emplace_back(i, 2.0 * i + 1);
  EXPECT_THROW(fit_ellipse(line), DegenerateError);
  EXPECT_THROW(fit_ellipse(sample({{0, 0}, 2, 1, 0}, 4)), DegenerateError);
}

TEST(FitEllipse, ProjectorFixpoint) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 100; ++k) {
    const double a = test::uniform(rng, 5, 80);
    const Ellipse truth = make_ellipse({test::uniform(rng, 0, 640), test::uniform(rng, 0, 480)}, a,
                                       a * test::uniform(rng, 0.3, 1.0), test::uniform(rng, 0, kPi));
    const Ellipse once = fit_ellipse(sample(truth, 24));
    const Ellipse twice = fit_ellipse(sample(once, 24));
    EXPECT_NEAR((once.center - twice.center).norm(), 0.0, 1e-9);
    EXPECT_NEAR(once.a, twice.a, 1e-9);
    EXPECT_NEAR(once.b, twice.b, 1e-9);
  }
}

TEST(Circumference, Examples) {
  EXPECT_NEAR(circumference({{0, 0}, 1, 1, 0}), 2 * kPi, 1e-12);
  EXPECT_NEAR(circumference({{0, 0}, 10, 10, 0}), 20 * kPi, 1e-12);
  const double oracle = perimeter_quadrature(2, 1);
  EXPECT_NEAR(oracle, 9.68845, 5e-6);
  EXPECT_LT(rel(circumference({{0, 0}, 2, 1, 0}), oracle), 1e-6);
}

TEST(Circumference, MatchesQuadratureUpToAspectFive) {
  for (double ratio = 1.0; ratio <= 5.0; ratio += 0.25) {
    const double b = 3.0;
    EXPECT_LT(rel(circumference({{0, 0}, b * ratio, b, 0}), perimeter_quadrature(b * ratio, b)), 1e-5)
        << "a/b = " << ratio;
  }
}

TEST(Conic, RoundTripAndDistances) {
  const Ellipse e{{10, -4}, 9, 4, 0.7};
  const Conic c = to_conic(e);
  EXPECT_NEAR(c.eval(e.center), -1.0, 1e-12);
  const Ellipse back = to_ellipse(c);
  EXPECT_NEAR((back.center - e.center).norm(), 0.0, 1e-9);
  EXPECT_NEAR(back.a, 9, 1e-9);
  EXPECT_NEAR(back.theta, 0.7, 1e-9);

  for (const Vec2& p : sample(e, 12)) {
    EXPECT_NEAR(sampson_distance(c, p), 0.0, 1e-9);
    EXPECT_NEAR(point_ellipse_distance(e, p), 0.0, 1e-9);
  }
  EXPECT_NEAR(rms_residual(e, sample(e, 12)), 0.0, 1e-9);
  // Along the major axis the nearest point is the vertex.
  const Vec2 axis(std::cos(0.7), std::sin(0.7));
  EXPECT_NEAR(point_ellipse_distance(e, e.center + 12 * axis), 3.0, 1e-9);
  EXPECT_NEAR(point_ellipse_distance(e, e.center), 4.0, 1e-9);

  Conic hyperbola;
  hyperbola.coeffs << 1, 0, -1, 0, 0, -1;
  EXPECT_THROW(to_ellipse(hyperbola), DegenerateError);
}

}  // namespace
}  // namespace gazekit
