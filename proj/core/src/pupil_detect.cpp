#include "gazekit/pupil_detect.hpp"

#include "gazekit/ellipse.hpp"
#include "gazekit/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace gazekit {

// ---------------------------------------------------------------------------
// Stage 1: coarse region from the center-surround kernel.

double center_surround_response(const IntegralImage& ii, int cx, int cy, int r) {
  const int ro = 3 * r;
  const std::int64_t inner = ii.sum(cx - r, cy - r, cx + r + 1, cy + r + 1);
  const std::int64_t outer = ii.sum(cx - ro, cy - ro, cx + ro + 1, cy + ro + 1);
  const auto clipped_area = [&](int half) {
    const std::int64_t w = std::min(cx + half + 1, ii.width()) - std::max(cx - half, 0);
    const std::int64_t h = std::min(cy + half + 1, ii.height()) - std::max(cy - half, 0);
    return std::max<std::int64_t>(w, 0) * std::max<std::int64_t>(h, 0);
  };
  const std::int64_t inner_n = clipped_area(r);
  const std::int64_t ring_n = clipped_area(ro) - inner_n;
  if (inner_n == 0 || ring_n == 0) return 0.0;
  return static_cast<double>(outer - inner) / static_cast<double>(ring_n) -
         static_cast<double>(inner) / static_cast<double>(inner_n);
}

CoarseRegion coarse_pupil_region(const GrayFrame& frame, const DetectorParams& params) {
  const int w = frame.width(), h = frame.height();
  const int rmin = std::max(1, static_cast<int>(std::lround(params.coarse_radius_range.min)));
  if (w < 3 * rmin || h < 3 * rmin) throw DataError("frame too small");
  const int rmax = std::min(static_cast<int>(std::lround(params.coarse_radius_range.max)),
                            (std::min(w, h) - 1) / 2);

  const IntegralImage ii(frame);
  CoarseRegion best;
  best.response = -std::numeric_limits<double>::infinity();
  for (int r = rmin; r <= std::max(rmin, rmax);) {
    const int stride = std::max(2, r / 3);
    for (int cy = r; cy + r < h; cy += stride) {
      for (int cx = r; cx + r < w; cx += stride) {
        const double resp = center_surround_response(ii, cx, cy, r);
        if (resp > best.response) {
          best.response = resp;
          best.center = Vec2(cx, cy);
          best.inner_radius = r;
        }
      }
    }
    const int next = static_cast<int>(std::lround(r * 1.15));
    r = std::max(r + 1, next);
  }
  if (!std::isfinite(best.response)) {
    // The smallest kernel does not fit; fall back to the frame center.
    best.response = 0.0;
    best.center = Vec2(w / 2, h / 2);
    best.inner_radius = rmin;
  }
  best.outer_radius = 3 * best.inner_radius;

  // The crop reaches 2r from the center so that the iris, not the sclera,
  // dominates the region median used by the Canny thresholds.
  const int half = std::max(2 * best.inner_radius,
                            static_cast<int>(std::ceil(1.5 * params.pupil_radius_range.min)));
  const int side = std::min({2 * half + 1, w, h});
  const int cx = static_cast<int>(best.center.x()), cy = static_cast<int>(best.center.y());
  best.rect.width = side;
  best.rect.height = side;
  best.rect.x = std::clamp(cx - side / 2, 0, w - side);
  best.rect.y = std::clamp(cy - side / 2, 0, h - side);
  return best;
}

// ---------------------------------------------------------------------------
// Stage 2: Canny.

EdgeMap::EdgeMap(int w, int h, Eigen::Vector2i org)
    : origin(org), width(w), height(h),
      mask(static_cast<std::size_t>(w) * h, 0),
      offset(static_cast<std::size_t>(w) * h, Eigen::Vector2f::Zero()) {}

std::size_t EdgeMap::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Vec2 EdgeMap::position(int x, int y) const {
  const auto& o = offset[static_cast<std::size_t>(y) * width + x];
  return {origin.x() + x + static_cast<double>(o.x()), origin.y() + y + static_cast<double>(o.y())};
}

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbors{
    {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

std::vector<float> gaussian_blur(const GrayFrame& img, double sigma) {
  const int w = img.width(), h = img.height();
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<float> tmp(static_cast<std::size_t>(w) * h), out(tmp.size());
  const auto px = img.pixels();
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += k[i + radius] * px[row + sx];
      }
      tmp[row + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += k[i + radius] * tmp[static_cast<std::size_t>(sy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

int neighbor_count(const EdgeMap& m, int x, int y) {
  int n = 0;
  for (const auto& d : kNeighbors) {
    const int nx = x + d[0], ny = y + d[1];
    if (nx >= 0 && ny >= 0 && nx < m.width && ny < m.height && m.at(nx, ny)) ++n;
  }
  return n;
}

void drop_isolated(EdgeMap& m) {
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y) && neighbor_count(m, x, y) == 0) m.set(x, y, false);
}

// Removes the inner pixel of 4-connected L corners so chains become 8-connected
// with one pixel per step. Removal never disconnects a chain: both arms stay
// diagonally adjacent.
void thin_staircases(EdgeMap& m) {
  const auto on = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < m.width && y < m.height && m.at(x, y);
  };
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      const bool n = on(x, y - 1), s = on(x, y + 1), e = on(x + 1, y), w = on(x - 1, y);
      if ((n && e && !on(x - 1, y + 1)) || (n && w && !on(x + 1, y + 1)) ||
          (s && e && !on(x - 1, y - 1)) || (s && w && !on(x + 1, y - 1))) {
        m.set(x, y, false);
      }
    }
  }
}

constexpr float kMinGradientThreshold = 8.0f;

}  // namespace

EdgeMap canny_edges(const GrayFrame& region, const DetectorParams& params, Eigen::Vector2i origin) {
  const int w = region.width(), h = region.height();
  EdgeMap out(w, h, origin);
  if (w < 3 || h < 3) return out;

  const auto smooth = gaussian_blur(region, params.canny_auto_sigma);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> mag(n, 0.0f);
  std::vector<std::uint8_t> dir(n, 0);  // 0: x, 1: y, 2: diagonal (+,+), 3: diagonal (+,-)

  constexpr float kTan22 = 0.41421356f;
  constexpr float kTan67 = 2.41421356f;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const auto at = [&](int dx, int dy) {
        return smooth[static_cast<std::size_t>(y + dy) * w + x + dx];
      };
      const float gx = (at(1, -1) + 2.0f * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2.0f * at(-1, 0) + at(-1, 1));
      const float gy = (at(-1, 1) + 2.0f * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2.0f * at(0, -1) + at(1, -1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::sqrt(gx * gx + gy * gy);
      const float ax = std::abs(gx), ay = std::abs(gy);
      if (ay <= kTan22 * ax) {
        dir[i] = 0;
      } else if (ay >= kTan67 * ax) {
        dir[i] = 1;
      } else {
        dir[i] = (gx * gy > 0.0f) ? 2 : 3;
      }
    }
  }

  const double median = median_intensity(histogram(region));
  const float low = std::max(kMinGradientThreshold, static_cast<float>(0.66 * median));
  const float high = std::max(low, static_cast<float>(1.33 * median));

  static constexpr std::array<std::array<int, 2>, 4> kStep{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
  std::vector<std::uint8_t> cls(n, 0);  // 1 weak, 2 strong
  std::vector<std::size_t> stack;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float m = mag[i];
      if (m <= low) continue;
      const auto& st = kStep[dir[i]];
      const float after = mag[static_cast<std::size_t>(y + st[1]) * w + x + st[0]];
      const float before = mag[static_cast<std::size_t>(y - st[1]) * w + x - st[0]];
      if (!(m > before && m >= after)) continue;
      cls[i] = m > high ? 2 : 1;
      if (cls[i] == 2) stack.push_back(i);
      const float denom = before - 2.0f * m + after;
      float delta = denom < 0.0f ? 0.5f * (before - after) / denom : 0.0f;
      delta = std::clamp(delta, -0.5f, 0.5f);
      out.offset[i] = Eigen::Vector2f(delta * st[0], delta * st[1]);
    }
  }

  // Hysteresis: grow strong pixels through 8-connected weak ones.
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (out.mask[i]) continue;
    out.mask[i] = 1;
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    for (const auto& d : kNeighbors) {
      const int nx = x + d[0], ny = y + d[1];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
      if (cls[j] != 0 && !out.mask[j]) stack.push_back(j);
    }
  }

  thin_staircases(out);
  drop_isolated(out);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 3: dark threshold.

int dark_threshold(const GrayFrame& region, int offset, int bin_width, double spike_fraction) {
  if (region.empty()) throw DataError("dark_threshold: empty region");
  if (offset < 0) throw DataError("dark_threshold: offset must be >= 0");
  if (bin_width < 1) throw DataError("dark_threshold: bin width must be >= 1");
  const Histogram hist = histogram(region);
  const int nbins = (256 + bin_width - 1) / bin_width;
  std::vector<std::uint64_t> bins(nbins, 0);
  std::uint64_t total = 0;
  for (int v = 0; v < 256; ++v) {
    bins[v / bin_width] += hist[v];
    total += hist[v];
  }
  const double min_count = spike_fraction * static_cast<double>(total);
  for (int b = 0; b < nbins; ++b) {
    const std::uint64_t c = bins[b];
    if (c == 0 || static_cast<double>(c) < min_count) continue;
    const std::uint64_t left = b > 0 ? bins[b - 1] : 0;
    const std::uint64_t right = b + 1 < nbins ? bins[b + 1] : 0;
    if (c < left || c < right) continue;
    double weighted = 0.0;
    for (int v = b * bin_width; v < std::min(256, (b + 1) * bin_width); ++v) weighted += double(v) * hist[v];
    const int level = static_cast<int>(std::lround(weighted / static_cast<double>(c)));
    return std::min(255, level + offset);
  }
  // Unreachable: the globally largest bin always qualifies.
  throw InvariantError("dark_threshold: no histogram spike");
}

// ---------------------------------------------------------------------------
// Stage 4: edge filter.

EdgeMap filter_edges(const EdgeMap& edges, const GrayFrame& region, int dark,
                     const DetectorParams& params) {
  if (edges.width != region.width() || edges.height != region.height())
    throw DataError("filter_edges: edge map and region dimensions differ");
  const IntegralImage dark_ii(region, [dark](std::uint8_t v) -> std::int64_t { return v <= dark; });
  const int sat = params.reflection_saturation;
  const IntegralImage sat_ii(region, [sat](std::uint8_t v) -> std::int64_t { return v >= sat; });
  const int half = params.filter_window / 2;

  EdgeMap out = edges;
  for (int y = 0; y < edges.height; ++y) {
    for (int x = 0; x < edges.width; ++x) {
      if (!edges.at(x, y)) continue;
      const bool has_dark = dark_ii.sum(x - half, y - half, x + half + 1, y + half + 1) > 0;
      const bool has_glint = sat_ii.sum(x - half, y - half, x + half + 1, y + half + 1) > 0;
      if (!has_dark || has_glint) out.set(x, y, false);
    }
  }
  drop_isolated(out);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 5: contours.

double Contour::length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) len += (points[i] - points[i - 1]).norm();
  return len;
}

std::vector<Contour> extract_contours(const EdgeMap& edges) {
  const int w = edges.width, h = edges.height;
  std::vector<std::uint8_t> seen(edges.mask.size(), 0);
  std::vector<Contour> out;

  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  const auto unvisited = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && edges.at(x, y) && !seen[idx(x, y)];
  };

  std::vector<Eigen::Vector2i> component;
  std::vector<Eigen::Vector2i> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!unvisited(x0, y0)) continue;

      // Collect the component, then restart the walk from an end point if
      // there is one.
      component.clear();
      stack.assign(1, {x0, y0});
      seen[idx(x0, y0)] = 1;
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        component.push_back(p);
        for (const auto& d : kNeighbors) {
          const int nx = p.x() + d[0], ny = p.y() + d[1];
          if (unvisited(nx, ny)) {
            seen[idx(nx, ny)] = 1;
            stack.push_back({nx, ny});
          }
        }
      }
      if (component.size() < 2) continue;

      Eigen::Vector2i start = component.front();
      for (const auto& p : component) {
        if (neighbor_count(edges, p.x(), p.y()) == 1) {
          start = p;
          break;
        }
      }
      for (const auto& p : component) seen[idx(p.x(), p.y())] = 2;

      const auto open = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && seen[idx(x, y)] == 2;
      };

      Contour c;
      c.pixels.reserve(component.size());
      std::vector<Eigen::Vector2i> path{start};
      seen[idx(start.x(), start.y())] = 3;
      c.pixels.push_back(start);
      Eigen::Vector2i heading = Eigen::Vector2i::Zero();
      while (!path.empty()) {
        const auto cur = path.back();
        // Prefer the neighbor that keeps the current heading; 4-neighbors win ties.
        int best = -1;
        int best_score = std::numeric_limits<int>::min();
        for (int k = 0; k < 8; ++k) {
          const int nx = cur.x() + kNeighbors[k][0], ny = cur.y() + kNeighbors[k][1];
          if (!open(nx, ny)) continue;
          const int score = 4 * (heading.x() * kNeighbors[k][0] + heading.y() * kNeighbors[k][1]) +
                            (k < 4 ? 1 : 0);
          if (score > best_score) {
            best_score = score;
            best = k;
          }
        }
        if (best < 0) {
          path.pop_back();
          heading.setZero();
          continue;
        }
        const Eigen::Vector2i next(cur.x() + kNeighbors[best][0], cur.y() + kNeighbors[best][1]);
        seen[idx(next.x(), next.y())] = 3;
        heading = next - cur;
        c.pixels.push_back(next);
        path.push_back(next);
      }

      c.points.reserve(c.pixels.size());
      for (const auto& p : c.pixels) c.points.push_back(edges.position(p.x(), p.y()));
      for (auto& p : c.pixels) p += edges.origin;
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 5b: curvature splitting.

std::vector<double> turn_angles(const Contour& contour, int chord) {
  const int n = static_cast<int>(contour.size());
  std::vector<double> out(n, 0.0);
  for (int i = chord; i + chord < n; ++i) {
    const Vec2 v1 = contour.points[i] - contour.points[i - chord];
    const Vec2 v2 = contour.points[i + chord] - contour.points[i];
    const double n1 = v1.norm(), n2 = v2.norm();
    if (n1 < 1e-12 || n2 < 1e-12) {
      out[i] = 180.0;
      continue;
    }
    const double c = std::clamp(v1.dot(v2) / (n1 * n2), -1.0, 1.0);
    out[i] = std::acos(c) * 180.0 / std::numbers::pi;
  }
  return out;
}

namespace {

// Curvature discontinuities below the split angle, e.g. where an eyelid edge
// meets the pupil arc: a local maximum of the turn angle that is at least
// corner_ratio times the turn angle one chord away on both sides.
std::vector<bool> corner_points(const std::vector<double>& angles, const DetectorParams& params) {
  const int n = static_cast<int>(angles.size());
  const int c = params.curvature_chord;
  std::vector<bool> out(angles.size(), false);
  for (int i = 2 * c; i + 2 * c < n; ++i) {
    const double a = angles[i];
    if (a < params.corner_min_angle) continue;
    if (a < params.corner_ratio * std::max(angles[i - c], angles[i + c])) continue;
    bool peak = true;
    for (int k = i - c; k <= i + c && peak; ++k) peak = angles[k] < a || (angles[k] == a && k >= i);
    out[i] = peak;
  }
  return out;
}

}  // namespace

std::vector<Contour> split_contours(const std::vector<Contour>& contours,
                                    const DetectorParams& params) {
  std::vector<Contour> out;
  const auto emit = [&out](const Contour& src, std::size_t begin, std::size_t end) {
    if (end - begin < 2) return;
    Contour c;
    c.pixels.assign(src.pixels.begin() + begin, src.pixels.begin() + end);
    c.points.assign(src.points.begin() + begin, src.points.begin() + end);
    out.push_back(std::move(c));
  };

  for (const auto& contour : contours) {
    // Cut at steps that are not 8-adjacent.
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= contour.size(); ++i) {
      const bool cut = i == contour.size() ||
                       (contour.pixels[i] - contour.pixels[i - 1]).cwiseAbs().maxCoeff() > 1;
      if (!cut) continue;
      Contour piece;
      piece.pixels.assign(contour.pixels.begin() + begin, contour.pixels.begin() + i);
      piece.points.assign(contour.points.begin() + begin, contour.points.begin() + i);
      begin = i;

      const auto angles = turn_angles(piece, params.curvature_chord);
      const auto corner = corner_points(angles, params);
      std::size_t run = 0;
      for (std::size_t j = 0; j <= piece.size(); ++j) {
        if (j == piece.size() || angles[j] > params.curvature_split_angle || corner[j]) {
          emit(piece, run, j);
          run = j + 1;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages 6-7: candidate fits and augmented combinatorial search.

namespace {

bool better(const CandidateFit& a, const CandidateFit& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return a.fit_residual < b.fit_residual;
}

std::optional<CandidateFit> evaluate(const std::vector<Contour>& subs, std::vector<int> members,
                                     const std::vector<double>& lengths,
                                     const DetectorParams& params) {
  std::vector<Vec2> pts;
  for (int m : members) pts.insert(pts.end(), subs[m].points.begin(), subs[m].points.end());
  Ellipse e;
  try {
    e = fit_ellipse(pts);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
  if (!params.pupil_radius_range.contains(e.a)) return std::nullopt;
  if (e.b < params.min_axis_ratio * e.a) return std::nullopt;
  const double residual = rms_residual(e, pts);
  if (!(residual <= params.seed_max_residual)) return std::nullopt;

  CandidateFit c;
  c.ellipse = e;
  c.support = std::move(members);
  for (int m : c.support) c.support_length += lengths[m];
  c.fit_residual = residual;
  c.confidence = std::min(1.0, c.support_length / circumference(e));
  return c;
}

bool supports(const Conic& conic, const Contour& c, const DetectorParams& params) {
  const std::size_t need =
      static_cast<std::size_t>(std::ceil(params.support_min_fraction * static_cast<double>(c.size())));
  std::size_t near = 0, far = 0;
  const std::size_t max_far = c.size() - need;
  for (const auto& p : c.points) {
    if (sampson_distance(conic, p) <= params.support_band) {
      if (++near >= need) return true;
    } else if (++far > max_far) {
      return false;
    }
  }
  return near >= need;
}

}  // namespace

std::optional<CandidateFit> combinatorial_search(const std::vector<Contour>& subs,
                                                 const DetectorParams& params,
                                                 SearchStats* stats) {
  std::vector<double> lengths(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) lengths[i] = subs[i].length();

  int refits = 0;
  std::vector<CandidateFit> seeds;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (static_cast<int>(subs[i].size()) < params.min_subcontour_points) continue;
    if (refits >= params.max_support_combinations) break;
    ++refits;
    if (auto c = evaluate(subs, {static_cast<int>(i)}, lengths, params)) seeds.push_back(std::move(*c));
  }
  std::sort(seeds.begin(), seeds.end(), better);
  if (stats) {
    stats->seeds = static_cast<int>(seeds.size());
    stats->seed_fits = seeds;
  }
  if (seeds.empty()) {
    if (stats) stats->refits = refits;
    return std::nullopt;
  }

  CandidateFit best = seeds.front();
  std::set<std::vector<int>> visited;
  for (const auto& s : seeds) visited.insert(s.support);
  std::vector<CandidateFit> beam(seeds.begin(),
                                 seeds.begin() + std::min<std::size_t>(seeds.size(), params.beam_width));

  while (!beam.empty() && refits < params.max_support_combinations) {
    std::vector<CandidateFit> next;
    for (const auto& cand : beam) {
      const Conic conic = to_conic(cand.ellipse);
      for (std::size_t j = 0; j < subs.size() && refits < params.max_support_combinations; ++j) {
        const int jj = static_cast<int>(j);
        if (std::binary_search(cand.support.begin(), cand.support.end(), jj)) continue;
        if (!supports(conic, subs[j], params)) continue;
        std::vector<int> members = cand.support;
        members.insert(std::upper_bound(members.begin(), members.end(), jj), jj);
        if (!visited.insert(members).second) continue;
        ++refits;
        if (auto c = evaluate(subs, std::move(members), lengths, params)) next.push_back(std::move(*c));
      }
    }
    std::sort(next.begin(), next.end(), better);
    if (next.size() > static_cast<std::size_t>(params.beam_width)) next.resize(params.beam_width);
    if (!next.empty() && better(next.front(), best)) best = next.front();
    beam = std::move(next);
  }
  if (stats) stats->refits = refits;
  return best;
}

// ---------------------------------------------------------------------------

Detection detect(const GrayFrame& frame, const DetectorParams& params, DetectionTrace* trace) {
  params.validate();
  if (frame.empty()) throw DataError("detect: empty frame");

  Eigen::Vector2i roi_origin = Eigen::Vector2i::Zero();
  const GrayFrame* work = &frame;
  GrayFrame roi_frame;
  if (params.roi) {
    const Rect r = clip_rect(*params.roi, frame.width(), frame.height());
    roi_frame = crop(frame, r);
    roi_origin = {r.x, r.y};
    work = &roi_frame;
  }

  const CoarseRegion region = coarse_pupil_region(*work, params);
  const GrayFrame sub = crop(*work, region.rect);
  const int dark = dark_threshold(sub, params.histogram_offset, params.histogram_bin_width,
                                  params.histogram_spike_fraction);
  const Eigen::Vector2i origin = roi_origin + Eigen::Vector2i(region.rect.x, region.rect.y);
  EdgeMap edges = canny_edges(sub, params, origin);
  EdgeMap filtered = filter_edges(edges, sub, dark, params);
  std::vector<Contour> contours = extract_contours(filtered);
  std::vector<Contour> subs = split_contours(contours, params);
  SearchStats stats;
  std::optional<CandidateFit> best = combinatorial_search(subs, params, trace ? &stats : nullptr);

  Detection out;
  if (best) {
    out.best_confidence = best->confidence;
    if (best->confidence >= params.confidence_threshold) {
      PupilDatum d;
      d.ellipse = best->ellipse;
      d.norm_pos = norm_from_pixel(best->ellipse.center, frame.width(), frame.height());
      d.confidence = best->confidence;
      d.timestamp = frame.timestamp();
      out.pupil = d;
    }
  }

  if (trace) {
    trace->region = region;
    trace->region.center += roi_origin.cast<double>();
    trace->region.rect.x += roi_origin.x();
    trace->region.rect.y += roi_origin.y();
    trace->dark = dark;
    trace->edges = std::move(edges);
    trace->filtered = std::move(filtered);
    trace->contours = std::move(contours);
    trace->sub_contours = std::move(subs);
    trace->search = std::move(stats);
    trace->best = best;
  }
  return out;
}

}  // namespace gazekit
