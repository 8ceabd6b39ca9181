#pragma once

// Randomized invariant checks shared by the unit tests and the acceptance run.

#include "gazekit/eval.hpp"
#include "gazekit/image.hpp"
#include "gazekit/pupil_detect.hpp"
#include "gazekit/synth.hpp"
#include "gazekit/timing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace gazekit::test {

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;

  bool ok() const { return cases > 0 && failures == 0; }
  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
};

inline double draw(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Shifting the image shifts the detected center by the same amount.
inline SuiteResult translation_equivariance(int cases, std::uint64_t seed = 1) {
  SuiteResult r{"translation equivariance"};
  std::mt19937_64 rng(seed);
  const DetectorParams params;
  for (int k = 0; k < cases; ++k) {
    EyeFrameSpec s;
    const double a = draw(rng, 28, 45);
    s.pupil = make_ellipse({draw(rng, 230, 410), draw(rng, 170, 310)}, a, a * draw(rng, 0.75, 1.0),
                           draw(rng, 0, std::numbers::pi));
    s.noise_sd = draw(rng, 0, 3);
    s.noise_seed = rng();
    const GrayFrame base = render_eye_frame(s).frame;
    const int dx = static_cast<int>(rng() % 41) - 20, dy = static_cast<int>(rng() % 41) - 20;
    const GrayFrame moved = shift_frame(base, dx, dy, static_cast<std::uint8_t>(s.appearance.sclera));
    ++r.cases;
    const Detection d0 = detect(base, params), d1 = detect(moved, params);
    if (!d0.pupil || !d1.pupil) {
      if (d0.pupil.has_value() != d1.pupil.has_value()) r.fail("case " + std::to_string(k) + ": detection lost");
      continue;
    }
    const Vec2 delta = d1.pupil->ellipse.center - d0.pupil->ellipse.center - Vec2(dx, dy);
    if (delta.cwiseAbs().maxCoeff() > 0.5)
      r.fail("case " + std::to_string(k) + ": center moved off by " + std::to_string(delta.norm()) + " px");
  }
  return r;
}

/// Rates never decrease with the threshold and stay in [0, 1].
inline SuiteResult curve_monotonicity(int cases, std::uint64_t seed = 2) {
  SuiteResult r{"detection curve monotonicity"};
  std::mt19937_64 rng(seed);
  for (int k = 0; k < cases; ++k) {
    std::vector<std::optional<double>> errors(1 + rng() % 300);
    for (auto& e : errors)
      if (rng() % 5) e = std::abs(draw(rng, -1, 1)) * draw(rng, 0, 12);
    std::vector<double> th(1 + rng() % 40);
    for (auto& t : th) t = draw(rng, 0, 12);
    std::sort(th.begin(), th.end());
    const DetectionRateCurve c = detection_rate_curve(errors, th);
    ++r.cases;
    for (std::size_t i = 0; i < c.rates.size(); ++i) {
      if (c.rates[i] < 0.0 || c.rates[i] > 1.0) r.fail("rate out of [0, 1]");
      if (i && c.rates[i] < c.rates[i - 1]) r.fail("rate decreased at threshold " + std::to_string(c.thresholds[i]));
      // Manual recount.
      const auto hits = std::count_if(errors.begin(), errors.end(), [&](const auto& e) { return e && *e <= th[i]; });
      if (c.rates[i] != static_cast<double>(hits) / static_cast<double>(errors.size())) r.fail("rate differs from recount");
    }
  }
  return r;
}

/// kept and discarded partition the input, in order.
inline SuiteResult outlier_partition(int cases, std::uint64_t seed = 3) {
  SuiteResult r{"outlier partition"};
  std::mt19937_64 rng(seed);
  for (int k = 0; k < cases; ++k) {
    std::vector<AngularPair> pairs(rng() % 200);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      pairs[i].distance = rng() % 7 == 0 ? 5.0 : draw(rng, 0, 10);
      pairs[i].site = static_cast<int>(i);
    }
    const OutlierSplit s = filter_outliers(pairs);
    ++r.cases;
    if (s.kept.size() + s.discarded.size() != pairs.size()) r.fail("sizes do not add up");
    std::size_t ik = 0, id = 0;
    for (const auto& p : pairs) {
      if (p.distance > kOutlierLimitDeg) {
        if (id >= s.discarded.size() || s.discarded[id++].site != p.site) r.fail("discarded set mismatch");
      } else if (ik >= s.kept.size() || s.kept[ik++].site != p.site) {
        r.fail("kept set mismatch");
      }
    }
  }
  return r;
}

/// Symmetric, non-negative, zero for identical ellipses.
inline SuiteResult hausdorff_symmetry(int cases, std::uint64_t seed = 4) {
  SuiteResult r{"hausdorff symmetry"};
  std::mt19937_64 rng(seed);
  for (int k = 0; k < cases; ++k) {
    const auto random_ellipse = [&] {
      const double a = draw(rng, 5, 60);
      return make_ellipse({draw(rng, -50, 50), draw(rng, -50, 50)}, a, a * draw(rng, 0.2, 1.0),
                          draw(rng, 0, std::numbers::pi));
    };
    const Ellipse e1 = random_ellipse();
    const Ellipse e2 = k % 4 == 0 ? make_ellipse(e1.center + Vec2(draw(rng, -1, 1), draw(rng, -1, 1)), e1.a, e1.b, e1.theta)
                                  : random_ellipse();
    ++r.cases;
    const double h12 = ellipse_hausdorff(e1, e2), h21 = ellipse_hausdorff(e2, e1);
    if (!(h12 >= 0.0)) r.fail("negative distance");
    if (std::abs(h12 - h21) > 1e-9 * std::max(1.0, h12)) r.fail("asymmetric: " + std::to_string(h12 - h21));
    if (ellipse_hausdorff(e1, e1) != 0.0) r.fail("nonzero self distance");
  }
  return r;
}

/// Pairing equals an exhaustive nearest search.
inline SuiteResult pairing_oracle(int cases, std::uint64_t seed = 5) {
  SuiteResult r{"pairing oracle"};
  std::mt19937_64 rng(seed);
  for (int k = 0; k < cases; ++k) {
    std::vector<double> a(1 + rng() % 100), b(1 + rng() % 100);
    for (auto& t : a) t = std::round(draw(rng, 0, 5) * 240) / 240;  // grid values force ties
    for (auto& t : b) t = std::round(draw(rng, 0, 5) * 480) / 480;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double gap = k % 3 ? kDefaultMaxGap : std::numeric_limits<double>::infinity();
    const auto got = pair_by_time(a, b, gap);
    std::vector<IndexPair> want;
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < a.size(); ++i)
        if (std::abs(a[i] - b[j]) < std::abs(a[best] - b[j])) best = i;
      if (std::abs(a[best] - b[j]) <= gap) want.push_back({best, j});
    }
    ++r.cases;
    if (got != want) r.fail("case " + std::to_string(k) + " differs from brute force");
  }
  return r;
}

}  // namespace gazekit::test
