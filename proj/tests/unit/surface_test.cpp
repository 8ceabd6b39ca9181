#include "gazekit/error.hpp"
#include "gazekit/homography.hpp"
#include "gazekit/surface.hpp"
#include "gazekit/synth.hpp"
#include "support.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>

namespace gazekit {
namespace {

Vec2 project(const Eigen::Matrix3d& h, const Vec2& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

Eigen::Matrix3d random_homography(std::mt19937_64& rng) {
  Eigen::Matrix3d h;
  h << test::uniform(rng, 0.7, 1.3), test::uniform(rng, -0.2, 0.2), test::uniform(rng, -5, 5),
      test::uniform(rng, -0.2, 0.2), test::uniform(rng, 0.7, 1.3), test::uniform(rng, -5, 5),
      test::uniform(rng, -0.02, 0.02), test::uniform(rng, -0.02, 0.02), 1.0;
  return h;
}

double rel_error(const Eigen::Matrix3d& got, const Eigen::Matrix3d& want) {
  return (got / got(2, 2) - want / want(2, 2)).norm() / (want / want(2, 2)).norm();
}

std::optional<Marker> find(const std::vector<Marker>& ms, int id) {
  for (const auto& m : ms)
    if (m.id == id) return m;
  return std::nullopt;
}

TEST(MarkerPattern, Layout) {
  for (int id = 0; id < kMarkerIdCount; ++id) {
    const auto cells = marker_pattern(id);
    for (int i = 0; i < kMarkerCells; ++i) {
      EXPECT_FALSE(cells[i]);
      EXPECT_FALSE(cells[6 * kMarkerCells + i]);
      EXPECT_FALSE(cells[i * kMarkerCells]);
      EXPECT_FALSE(cells[i * kMarkerCells + 6]);
    }
    EXPECT_TRUE(cells[1 * kMarkerCells + 1]);
    const auto dec = decode_marker_cells(cells);
    ASSERT_TRUE(dec.has_value());
    EXPECT_EQ(dec->id, id);
    EXPECT_EQ(dec->rotation, 0);
  }
  EXPECT_THROW(marker_pattern(64), DataError);
}

TEST(MarkerPattern, DecodesEveryRotation) {
  const auto cells = marker_pattern(37);
  auto rotated = cells;
  for (int turn = 1; turn < 4; ++turn) {
    const auto prev = rotated;
    // Clockwise quarter turn of the grid.
    for (int r = 0; r < kMarkerCells; ++r)
      for (int c = 0; c < kMarkerCells; ++c) rotated[r * kMarkerCells + c] = prev[(6 - c) * kMarkerCells + r];
    const auto dec = decode_marker_cells(rotated);
    ASSERT_TRUE(dec.has_value());
    EXPECT_EQ(dec->id, 37);
    EXPECT_NE(dec->rotation, 0);
  }
  auto corrupt = cells;
  corrupt[1 * kMarkerCells + 1] = false;
  EXPECT_FALSE(decode_marker_cells(corrupt).has_value());
}

TEST(DetectMarkers, AxisAligned) {
  SceneSpec spec;
  spec.width = 400;
  spec.height = 300;
  const MarkerCorners c{Vec2(150, 100), Vec2(250, 100), Vec2(250, 200), Vec2(150, 200)};
  spec.fiducials = {{37, c}};
  const auto ms = detect_markers(render_scene_frame(spec).frame);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].id, 37);
  for (int i = 0; i < 4; ++i) EXPECT_LE((ms[0].corners[i] - c[i]).norm(), 0.5) << "corner " << i;
}

TEST(DetectMarkers, PerspectiveWarp) {
  Eigen::Matrix3d h;
  h << 0.9, 0.15, 40, -0.1, 1.05, 30, 0.0006, 0.0004, 1;
  SceneSpec spec;
  spec.width = 500;
  spec.height = 400;
  MarkerCorners c;
  const Vec2 square[4] = {{150, 100}, {260, 100}, {260, 210}, {150, 210}};
  for (int i = 0; i < 4; ++i) c[i] = project(h, square[i]);
  spec.fiducials = {{37, c}};
  const auto ms = detect_markers(render_scene_frame(spec).frame);
  const auto m = find(ms, 37);
  ASSERT_TRUE(m.has_value());
  for (int i = 0; i < 4; ++i) EXPECT_LE((m->corners[i] - c[i]).norm(), 1.0);
}

TEST(DetectMarkers, RotationResolved) {
  const MarkerCorners base{Vec2(150, 100), Vec2(250, 100), Vec2(250, 200), Vec2(150, 200)};
  for (int turn = 0; turn < 4; ++turn) {
    MarkerCorners c;
    for (int i = 0; i < 4; ++i) c[i] = base[(i + turn) % 4];
    SceneSpec spec;
    spec.width = 400;
    spec.height = 300;
    spec.fiducials = {{21, c}};
    const auto ms = detect_markers(render_scene_frame(spec).frame);
    ASSERT_EQ(ms.size(), 1u) << "turn " << turn;
    EXPECT_EQ(ms[0].id, 21);
    for (int i = 0; i < 4; ++i) EXPECT_LE((ms[0].corners[i] - c[i]).norm(), 0.5);
  }
}

TEST(DetectMarkers, BlankFrame) {
  EXPECT_TRUE(detect_markers(GrayFrame(320, 240, 160)).empty());
}

TEST(Homography, IdentityFromIdenticalPoints) {
  const std::vector<Vec2> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Homography h = estimate_homography(pts, pts);
  EXPECT_NEAR((h.matrix() - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-12);
}

TEST(Homography, RecoversKnownMatrix) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Matrix3d truth = random_homography(rng);
    std::vector<Vec2> src, dst;
    for (int i = 0; i < 12; ++i) {
      src.emplace_back(test::uniform(rng, 0, 100), test::uniform(rng, 0, 100));
      dst.push_back(project(truth, src.back()));
    }
    const Homography h = estimate_homography(src, dst);
    EXPECT_LT(rel_error(h.matrix(), truth), 1e-9);
    EXPECT_LT(h.rms_error, 1e-9);
  }
}

TEST(Homography, Degenerate) {
  const std::vector<Vec2> line = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const std::vector<Vec2> quad = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_THROW(estimate_homography(line, quad), DegenerateError);
  EXPECT_THROW(estimate_homography(std::span(quad).first(3), std::span(quad).first(3)), DegenerateError);
  EXPECT_THROW(Homography(Eigen::Matrix3d::Zero()), DegenerateError);
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(2, 0) = 1;
  h(2, 2) = 0;
  EXPECT_THROW(Homography(h).apply({0, 5}), DegenerateError);
}

TEST(Homography, RoundTripAndComposition) {
  std::mt19937_64 rng(4);
  const Homography h(random_homography(rng));
  const Homography g(random_homography(rng));
  const Homography inv = h.inverse();
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p(test::uniform(rng, 0, 100), test::uniform(rng, 0, 100));
    EXPECT_NEAR((inv.apply(h.apply(p)) - p).norm(), 0.0, 1e-9);
    EXPECT_NEAR(((h * g).apply(p) - h.apply(g.apply(p))).norm(), 0.0, 1e-9);
  }
}

TEST(Homography, SimilarityNormalizationInvariant) {
  std::mt19937_64 rng(31);
  const Eigen::Matrix3d truth = random_homography(rng);
  std::vector<Vec2> src, dst, moved;
  Eigen::Matrix3d s;
  s << 3.0 * std::cos(0.4), -3.0 * std::sin(0.4), 250, 3.0 * std::sin(0.4), 3.0 * std::cos(0.4), -80, 0, 0, 1;
  for (int i = 0; i < 10; ++i) {
    src.emplace_back(test::uniform(rng, 0, 100), test::uniform(rng, 0, 100));
    dst.push_back(project(truth, src.back()));
    moved.push_back(project(s, src.back()));
  }
  const Homography a = estimate_homography(src, dst);
  const Homography b = estimate_homography(moved, dst);
  EXPECT_LT(rel_error(b.matrix() * s, a.matrix()), 1e-9);
}

TEST(MapToSurface, Examples) {
  const CameraIntrinsics scene{1280, 720, 90};
  GazeDatum g;
  g.norm_pos = {0.3, 0.6};
  g.timestamp = 4.5;
  const SurfaceGaze id = map_gaze_to_surface(g, Homography(), scene);
  EXPECT_EQ(id.norm_pos, g.norm_pos);
  EXPECT_TRUE(id.on_surface);
  EXPECT_EQ(id.timestamp, 4.5);
  EXPECT_NEAR((id.scene_px - Vec2(384, 432)).norm(), 0.0, 1e-9);

  Eigen::Matrix3d m;
  m << 1.2, 0.1, -0.1, -0.05, 0.9, 0.05, 0.2, -0.1, 1.0;
  const SurfaceGaze w = map_gaze_to_surface(g, Homography(m), scene);
  const double den = 0.2 * 0.3 - 0.1 * 0.6 + 1.0;
  EXPECT_NEAR(w.norm_pos.x(), (1.2 * 0.3 + 0.1 * 0.6 - 0.1) / den, 1e-12);
  EXPECT_NEAR(w.norm_pos.y(), (-0.05 * 0.3 + 0.9 * 0.6 + 0.05) / den, 1e-12);

  g.norm_pos = {1.4, 0.5};
  EXPECT_FALSE(map_gaze_to_surface(g, Homography(), scene).on_surface);
}

TEST(LocateSurface, RecoversPlacement) {
  const CameraIntrinsics scene{1280, 720, 90};
  Eigen::Matrix3d place;
  place << 520, 60, 330, -40, 380, 170, 0.05, 0.08, 1;
  SceneSpec spec;
  spec.surfaces = {{corner_marker_surface("desk", {0, 1, 2, 3}), Homography(place)}};
  const auto markers = detect_markers(render_scene_frame(spec).frame);
  EXPECT_EQ(markers.size(), 4u);
  const auto h = locate_surface(spec.surfaces[0].definition, markers, scene);
  ASSERT_TRUE(h.has_value());
  Eigen::Matrix3d norm = Eigen::Matrix3d::Identity();
  norm(0, 0) = 1.0 / 1280;
  norm(1, 1) = 1.0 / 720;
  const Eigen::Matrix3d truth = (norm * place).inverse();
  EXPECT_LT(rel_error(h->matrix(), truth), 1e-3);

  SurfaceDefinition other;
  other.name = "other";
  other.markers[40] = spec.surfaces[0].definition.markers.at(0);
  EXPECT_FALSE(locate_surface(other, markers, scene).has_value());
}

TEST(SurfaceDefinition, JsonRoundTripAndValidation) {
  const SurfaceDefinition def = corner_marker_surface("board", {5, 6, 7, 8}, 0.15);
  const SurfaceDefinition back = surface_from_json(to_json(def));
  EXPECT_EQ(back.name, "board");
  ASSERT_EQ(back.markers.size(), 4u);
  EXPECT_EQ(back.markers.at(7)[2], def.markers.at(7)[2]);
  EXPECT_THROW(surface_from_json(R"({"name":"x","markers":[]})"), DataError);
  EXPECT_THROW(surface_from_json(R"({"name":"x","markers":[{"id":70,"corners":[[0,0],[1,0],[1,1],[0,1]]}]})"),
               DataError);
}

}  // namespace
}  // namespace gazekit
