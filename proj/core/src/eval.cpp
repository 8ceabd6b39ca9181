#include "gazekit/eval.hpp"

#include "gazekit/ellipse.hpp"
#include "gazekit/error.hpp"
#include "gazekit/image.hpp"
#include "gazekit/pupil_detect.hpp"
#include "gazekit/timing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <thread>

namespace gazekit {

using nlohmann::json;

OutlierSplit filter_outliers(std::span<const AngularPair> pairs, double limit_deg) {
  OutlierSplit out;
  for (const auto& p : pairs) (p.distance > limit_deg ? out.discarded : out.kept).push_back(p);
  return out;
}

double accuracy(std::span<const double> offsets) {
  if (offsets.empty()) throw DataError("accuracy needs at least one pair");
  double sum = 0.0;
  for (double d : offsets) sum += d;
  return sum / static_cast<double>(offsets.size());
}

double accuracy(std::span<const AngularPair> kept) {
  std::vector<double> d;
  d.reserve(kept.size());
  for (const auto& p : kept) d.push_back(p.distance);
  return accuracy(std::span<const double>(d));
}

PrecisionResult precision(std::span<const std::vector<double>> successive) {
  PrecisionResult r;
  double pooled_sq = 0.0;
  double window_sum = 0.0;
  for (const auto& w : successive) {
    if (w.empty()) {
      r.per_window.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double sq = 0.0;
    for (double d : w) sq += d * d;
    pooled_sq += sq;
    r.distances += w.size();
    const double rms = std::sqrt(sq / static_cast<double>(w.size()));
    r.per_window.push_back(rms);
    window_sum += rms;
    ++r.windows_used;
  }
  if (r.windows_used == 0) throw DataError("precision: no window holds two or more samples");
  r.pooled = std::sqrt(pooled_sq / static_cast<double>(r.distances));
  r.mean_per_window = window_sum / static_cast<double>(r.windows_used);
  return r;
}

PrecisionResult precision(std::span<const std::vector<Vec2>> windows, const CameraIntrinsics& scene) {
  std::vector<std::vector<double>> successive;
  successive.reserve(windows.size());
  for (const auto& w : windows) {
    std::vector<double> d;
    for (std::size_t i = 1; i < w.size(); ++i)
      d.push_back(angular_distance(pixel_from_norm(w[i], scene.width, scene.height),
                                   pixel_from_norm(w[i - 1], scene.width, scene.height), scene));
    successive.push_back(std::move(d));
  }
  return precision(std::span<const std::vector<double>>(successive));
}

// ---------------------------------------------------------------------------

double ellipse_hausdorff(const Ellipse& e1, const Ellipse& e2, int samples) {
  if (samples < 1) throw DataError("hausdorff: need at least one sample");
  double h = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = 2.0 * std::numbers::pi * k / samples;
    h = std::max(h, point_ellipse_distance(e2, e1.point_at(t)));
    h = std::max(h, point_ellipse_distance(e1, e2.point_at(t)));
  }
  return h;
}

double ellipse_hausdorff(const Ellipse& e1, const Ellipse& e2) {
  if (e1 == e2) return 0.0;
  int n = 128;
  double h = ellipse_hausdorff(e1, e2, n);
  while (n < (1 << 16)) {
    n *= 2;
    const double next = ellipse_hausdorff(e1, e2, n);
    const double change = std::abs(next - h);
    h = next;
    if (change <= 0.005 * next || change < 1e-12) break;
  }
  return h;
}

double DetectionRateCurve::rate_at(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (thresholds[i] == threshold) return rates[i];
  throw DataError("detection rate curve has no threshold " + std::to_string(threshold));
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(0.5 * i);
  return t;
}

DetectionRateCurve detection_rate_curve(std::span<const std::optional<double>> errors,
                                        std::span<const double> thresholds) {
  if (errors.empty()) throw DataError("detection rate curve needs at least one result");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1])) throw DataError("thresholds must be strictly ascending");
  std::vector<double> sorted;
  for (const auto& e : errors)
    if (e) sorted.push_back(*e);
  std::sort(sorted.begin(), sorted.end());
  DetectionRateCurve c;
  c.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    const auto hits = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    c.rates.push_back(static_cast<double>(hits) / static_cast<double>(errors.size()));
  }
  return c;
}

DetectionRateCurve detection_rate_curve(std::span<const DetectionOutcome> results,
                                        std::span<const double> thresholds) {
  std::vector<std::optional<double>> errors;
  errors.reserve(results.size());
  for (const auto& r : results)
    errors.push_back(r.detected ? std::optional(ellipse_hausdorff(*r.detected, r.truth)) : std::nullopt);
  return detection_rate_curve(std::span<const std::optional<double>>(errors), thresholds);
}

std::string curve_csv(const DetectionRateCurve& curve) {
  std::string out = "threshold,rate\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g\n", curve.thresholds[i], curve.rates[i]);
    out += buf;
  }
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const DetectionRateCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << curve_csv(curve);
  if (!out) throw IoError(path.string(), "write failed");
}

// ---------------------------------------------------------------------------

BenchmarkResult run_benchmark(const std::filesystem::path& dir, const DetectorParams& params, int threads) {
  params.validate();
  BenchmarkResult r;
  r.truth = read_benchmark_truth(dir);
  const std::size_t n = r.truth.size();
  if (n == 0) throw DataError(dir.string() + ": benchmark has no frames");
  for (const auto& t : r.truth)
    if (!std::filesystem::exists(benchmark_frame_path(dir, t.index)))
      throw IoError(benchmark_frame_path(dir, t.index).string(), "frame missing");
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::size_t>(threads, n));
  r.threads = threads;
  r.detections.assign(n, std::nullopt);
  r.errors.assign(n, std::nullopt);
  std::vector<double> seconds(n, 0.0);

  const auto wall0 = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < n; i = next++) {
        const GrayFrame frame = read_pgm(benchmark_frame_path(dir, r.truth[i].index));
        StageTimer timer;
        const Detection d = detect(frame, params);
        seconds[i] = timer.mark();
        if (d.pupil) {
          r.detections[i] = d.pupil;
          r.errors[i] = ellipse_hausdorff(d.pupil->ellipse, r.truth[i].ellipse);
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  for (double s : seconds) r.detect_seconds += s;

  const auto thresholds = default_thresholds();
  r.curve = detection_rate_curve(std::span<const std::optional<double>>(r.errors), thresholds);
  r.rate_2px = r.curve.rate_at(2.0);
  r.rate_5px = r.curve.rate_at(5.0);
  for (Tier tier : {Tier::clean, Tier::noisy, Tier::occluded}) {
    TierSummary s;
    s.tier = tier;
    std::size_t hit2 = 0, hit5 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (r.truth[i].tier != tier) continue;
      ++s.frames;
      if (!r.errors[i]) ++s.missed;
      else {
        hit2 += *r.errors[i] <= 2.0;
        hit5 += *r.errors[i] <= 5.0;
      }
    }
    if (s.frames == 0) continue;
    s.rate_2px = static_cast<double>(hit2) / s.frames;
    s.rate_5px = static_cast<double>(hit5) / s.frames;
    r.tiers.push_back(s);
  }
  return r;
}

std::string to_json(const BenchmarkResult& r, int indent) {
  json tiers = json::array();
  for (const auto& t : r.tiers)
    tiers.push_back({{"tier", to_string(t.tier)}, {"frames", t.frames}, {"missed", t.missed},
                     {"rate_2px", t.rate_2px}, {"rate_5px", t.rate_5px}});
  json j{{"frames", r.truth.size()},
         {"rate_2px", r.rate_2px},
         {"rate_5px", r.rate_5px},
         {"thresholds", r.curve.thresholds},
         {"rates", r.curve.rates},
         {"tiers", tiers},
         {"detect_seconds", r.detect_seconds},
         {"wall_seconds", r.wall_seconds},
         {"threads", r.threads}};
  return j.dump(indent);
}

std::string to_table(const BenchmarkResult& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "frames %zu  rate@2px %.3f  rate@5px %.3f  detect %.2f s (%.2f ms/frame)  wall %.2f s  threads %d\n",
                r.truth.size(), r.rate_2px, r.rate_5px, r.detect_seconds,
                1e3 * r.detect_seconds / std::max<std::size_t>(1, r.truth.size()), r.wall_seconds, r.threads);
  out += buf;
  out += "tier       frames  missed  rate@2px  rate@5px\n";
  for (const auto& t : r.tiers) {
    std::snprintf(buf, sizeof buf, "%-9s  %6zu  %6zu  %8.3f  %8.3f\n", to_string(t.tier), t.frames, t.missed,
                  t.rate_2px, t.rate_5px);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------

AccuracyReport evaluate_session(const SimulatedSession& s, const EvalOptions& options) {
  const auto& opt = options.calibration;
  const auto cal_pairs = screen_marker_session(s.calibration_sites, s.pupils, s.markers, opt);
  const CalibrationModel model = calibrate(cal_pairs, options.degree);

  AccuracyReport rep;
  rep.calibration_pairs = cal_pairs.size();
  rep.calibration_rms = model.rms_residual;
  const auto& scene = s.scene;
  const auto to_px = [&](const Vec2& n) { return pixel_from_norm(n, scene.width, scene.height); };

  // Settled test-phase marker observations.
  std::vector<double> marker_ts;
  std::vector<std::size_t> marker_idx, marker_site;
  for (std::size_t i = 0; i < s.markers.size(); ++i) {
    const double t = s.markers[i].timestamp;
    for (std::size_t k = 0; k < s.test_sites.size(); ++k) {
      const auto& site = s.test_sites[k];
      if (t >= site.start + opt.settle && t < site.end) {
        marker_ts.push_back(t);
        marker_idx.push_back(i);
        marker_site.push_back(k);
        break;
      }
    }
  }
  std::vector<double> pupil_ts;
  pupil_ts.reserve(s.pupils.size());
  for (const auto& p : s.pupils) pupil_ts.push_back(p.timestamp);
  if (!std::is_sorted(pupil_ts.begin(), pupil_ts.end()) || !std::is_sorted(marker_ts.begin(), marker_ts.end()))
    throw DataError("session streams must be sorted by timestamp");

  std::vector<AngularPair> pairs;
  for (const auto& ip : pair_by_time(pupil_ts, marker_ts, opt.max_gap)) {
    const PupilDatum& p = s.pupils[ip.a];
    if (p.confidence < opt.min_confidence) continue;
    const auto& m = s.markers[marker_idx[ip.b]];
    AngularPair ap;
    ap.gaze = model.evaluate(p.norm_pos);
    ap.target = m.norm_pos;
    ap.distance = angular_distance(to_px(ap.gaze), to_px(ap.target), scene);
    ap.site = s.test_sites[marker_site[ip.b]].index;
    ap.timestamp = m.timestamp;
    pairs.push_back(ap);
  }
  const auto split = filter_outliers(pairs, options.outlier_limit);
  rep.n_used = split.kept.size();
  rep.n_discarded = split.discarded.size();
  rep.accuracy = accuracy(std::span<const AngularPair>(split.kept));
  rep.pairs = pairs;

  // Fixation windows: confident eye samples of each settled test dwell,
  // split wherever a sample is not usable.
  std::vector<std::vector<Vec2>> windows;
  std::vector<std::size_t> window_site;
  for (std::size_t k = 0; k < s.test_sites.size(); ++k) {
    const auto& site = s.test_sites[k];
    const auto lo = std::lower_bound(pupil_ts.begin(), pupil_ts.end(), site.start + opt.settle) - pupil_ts.begin();
    const auto hi = std::lower_bound(pupil_ts.begin(), pupil_ts.end(), site.end) - pupil_ts.begin();
    std::vector<Vec2> w;
    for (auto i = lo; i < hi; ++i) {
      const auto& p = s.pupils[i];
      if (p.confidence < opt.min_confidence) {
        if (!w.empty()) {
          windows.push_back(std::move(w));
          window_site.push_back(k);
          w.clear();
        }
        continue;
      }
      w.push_back(model.evaluate(p.norm_pos));
    }
    if (!w.empty()) {
      windows.push_back(std::move(w));
      window_site.push_back(k);
    }
  }
  const auto prec = precision(std::span<const std::vector<Vec2>>(windows), scene);
  rep.precision = prec.pooled;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> site_sq(s.test_sites.size(), 0.0);
  std::vector<std::size_t> site_n(s.test_sites.size(), 0);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& pts = windows[w];
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double d = angular_distance(to_px(pts[i]), to_px(pts[i - 1]), scene);
      site_sq[window_site[w]] += d * d;
      ++site_n[window_site[w]];
    }
  }
  double prec_sum = 0.0;
  std::size_t prec_sites = 0;
  for (std::size_t k = 0; k < s.test_sites.size(); ++k) {
    const auto& site = s.test_sites[k];
    SiteReport sr;
    sr.index = site.index;
    sr.target = site.target;
    double sum = 0.0;
    for (const auto& p : split.kept)
      if (p.site == site.index) {
        ++sr.n_used;
        sum += p.distance;
      }
    for (const auto& p : split.discarded)
      if (p.site == site.index) ++sr.n_discarded;
    sr.accuracy = sr.n_used ? sum / sr.n_used : nan;
    sr.precision = site_n[k] ? std::sqrt(site_sq[k] / site_n[k]) : nan;
    if (site_n[k]) {
      prec_sum += sr.precision;
      ++prec_sites;
    }
    if (sr.n_used + sr.n_discarded == 0) rep.sites_without_pairs.push_back(site.index);
    rep.sites.push_back(sr);
  }
  rep.precision_per_site = prec_sites ? prec_sum / prec_sites : nan;
  return rep;
}

AccuracyReport run_accuracy_session(const EyeSceneRig& rig, const SessionProtocol& protocol,
                                    const EvalOptions& options) {
  return evaluate_session(simulate_session(rig, protocol), options);
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string to_json(const AccuracyReport& r, int indent) {
  json sites = json::array();
  for (const auto& s : r.sites)
    sites.push_back({{"index", s.index},
                     {"target", {s.target.x(), s.target.y()}},
                     {"n_used", s.n_used},
                     {"n_discarded", s.n_discarded},
                     {"accuracy", number_or_null(s.accuracy)},
                     {"precision", number_or_null(s.precision)}});
  json j{{"accuracy", r.accuracy},
         {"precision", r.precision},
         {"precision_per_site", number_or_null(r.precision_per_site)},
         {"n_used", r.n_used},
         {"n_discarded", r.n_discarded},
         {"calibration_pairs", r.calibration_pairs},
         {"calibration_rms", r.calibration_rms},
         {"sites_without_pairs", r.sites_without_pairs},
         {"sites", sites}};
  return j.dump(indent);
}

std::string to_table(const AccuracyReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "accuracy %.4f deg  precision %.4f deg (per-site mean %.4f)  used %zu  discarded %zu\n",
                r.accuracy, r.precision, r.precision_per_site, r.n_used, r.n_discarded);
  out += buf;
  out += "site  target_x  target_y  used  discarded  accuracy  precision\n";
  for (const auto& s : r.sites) {
    std::snprintf(buf, sizeof buf, "%4d  %8.4f  %8.4f  %4zu  %9zu  %8.4f  %9.4f\n", s.index, s.target.x(),
                  s.target.y(), s.n_used, s.n_discarded, s.accuracy, s.precision);
    out += buf;
  }
  if (!r.sites_without_pairs.empty()) {
    out += "sites without pairs:";
    for (int i : r.sites_without_pairs) out += " " + std::to_string(i);
    out += '\n';
  }
  return out;
}

}  // namespace gazekit
