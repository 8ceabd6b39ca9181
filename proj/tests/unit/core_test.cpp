#include "gazekit/config.hpp"
#include "gazekit/error.hpp"
#include "gazekit/image.hpp"
#include "gazekit/types.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace gazekit {
namespace {

TEST(Normalize, Examples) {
  EXPECT_EQ(norm_from_pixel({0, 0}, 640, 480), Vec2(0.0, 0.0));
  EXPECT_EQ(norm_from_pixel({640, 480}, 640, 480), Vec2(1.0, 1.0));
  EXPECT_EQ(norm_from_pixel({320, 120}, 640, 480), Vec2(0.5, 0.25));
}

TEST(Normalize, RoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p(test::uniform(rng, 0, 1280), test::uniform(rng, 0, 720));
    const Vec2 q = pixel_from_norm(norm_from_pixel(p, 1280, 720), 1280, 720);
    EXPECT_NEAR((p - q).norm(), 0.0, 1e-9);
  }
}

TEST(PxPerDegree, Examples) {
  EXPECT_NEAR(px_per_degree(1280, 720, 90), 16.32, 0.005);
  EXPECT_DOUBLE_EQ(px_per_degree(100, 0, 100), 1.0);
  EXPECT_NEAR(px_per_degree(1920, 1080, 90), std::hypot(1920.0, 1080.0) / 90.0, 1e-12);
  EXPECT_NEAR(px_per_degree(1920, 1080, 90), 24.48, 0.005);
  EXPECT_THROW(px_per_degree(640, 480, 0), DataError);
}

TEST(AngularDistance, Examples) {
  const CameraIntrinsics scene{1280, 720, 90};
  EXPECT_EQ(angular_distance({5, 5}, {5, 5}, scene), 0.0);
  const double ppd = scene.px_per_degree();
  EXPECT_NEAR(angular_distance({100, 100}, {100 + ppd, 100}, scene), 1.0, 1e-12);
  // 2 px/deg: diagonal 200 over 100 degrees.
  const CameraIntrinsics two{120, 160, 100};
  EXPECT_NEAR(angular_distance({0, 0}, {3, 4}, two), 2.5, 1e-12);
}

TEST(AngularDistance, MetricAxioms) {
  const CameraIntrinsics scene{1280, 720, 90};
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const Vec2 p(test::uniform(rng, 0, 1280), test::uniform(rng, 0, 720));
    const Vec2 q(test::uniform(rng, 0, 1280), test::uniform(rng, 0, 720));
    const Vec2 r(test::uniform(rng, 0, 1280), test::uniform(rng, 0, 720));
    const double pq = angular_distance(p, q, scene);
    EXPECT_EQ(pq, angular_distance(q, p, scene));
    EXPECT_GT(pq, 0.0);
    EXPECT_LE(pq, angular_distance(p, r, scene) + angular_distance(r, q, scene) + 1e-12);
  }
}

TEST(EllipseType, MakeEllipseNormalizes) {
  const Ellipse e = make_ellipse({1, 2}, 3, 5, -0.25);
  EXPECT_EQ(e.a, 5);
  EXPECT_EQ(e.b, 3);
  EXPECT_GE(e.theta, 0.0);
  EXPECT_LT(e.theta, std::numbers::pi);
  EXPECT_TRUE(e.is_valid());
  // Same point set as the input description.
  const Ellipse raw{{1, 2}, 3, 5, -0.25};
  for (int i = 0; i < 16; ++i) {
    const Vec2 p = raw.point_at(i * 0.4);
    const Vec2 d = p - e.center;
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    const double u = c * d.x() + s * d.y(), v = -s * d.x() + c * d.y();
    EXPECT_NEAR(u * u / 25 + v * v / 9, 1.0, 1e-12);
  }
}

TEST(Config, DefaultsAndRoundTrip) {
  const Config def = config_from_json("{}");
  EXPECT_EQ(def.detector.histogram_offset, 11);
  EXPECT_EQ(def.calibration_degree, 2);
  EXPECT_EQ(def.scene_camera.width, 1280);

  const Config c = config_from_json(R"({"detector":{"histogram_offset":7,"roi":[1,2,300,200]},
                                        "calibration":{"degree":3}})");
  EXPECT_EQ(c.detector.histogram_offset, 7);
  ASSERT_TRUE(c.detector.roi.has_value());
  EXPECT_EQ(*c.detector.roi, (Rect{1, 2, 300, 200}));
  const Config again = config_from_json(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_json(R"({"detectr":{}})"), DataError);
  EXPECT_THROW(config_from_json(R"({"detector":{"confidence_threshold":1.5}})"), DataError);
  EXPECT_THROW(config_from_json("{"), DataError);
  EXPECT_THROW(load_config("/nonexistent/gazekit.json"), IoError);
}

TEST(Image, PgmRoundTrip) {
  GrayFrame f(7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) f.at(x, y) = static_cast<std::uint8_t>(x * 31 + y * 7);
  const GrayFrame back = decode_pgm(encode_pgm(f));
  EXPECT_EQ(back.pixels().size(), f.pixels().size());
  EXPECT_TRUE(std::equal(back.pixels().begin(), back.pixels().end(), f.pixels().begin()));

  test::TempDir dir;
  write_pgm(dir / "a.pgm", f);
  const GrayFrame disk = read_pgm(dir / "a.pgm");
  EXPECT_TRUE(std::equal(disk.pixels().begin(), disk.pixels().end(), f.pixels().begin()));
  EXPECT_THROW(decode_pgm("P2\n1 1\n255\n0"), DataError);
}

TEST(Image, IntegralMatchesBruteForce) {
  std::mt19937_64 rng(5);
  GrayFrame f(23, 17);
  for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(rng() & 0xff);
  const IntegralImage ii(f);
  for (int k = 0; k < 200; ++k) {
    int x0 = static_cast<int>(rng() % 24), x1 = static_cast<int>(rng() % 24);
    int y0 = static_cast<int>(rng() % 18), y1 = static_cast<int>(rng() % 18);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    std::int64_t s = 0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) s += f.at(x, y);
    EXPECT_EQ(ii.sum(x0, y0, x1, y1), s);
  }
}

TEST(Image, CropHistogramMedianShift) {
  GrayFrame f(10, 10, 100);
  f.at(2, 3) = 7;
  EXPECT_EQ(clip_rect({-5, -5, 10, 10}, 10, 10), (Rect{0, 0, 5, 5}));
  const GrayFrame c = crop(f, {2, 3, 4, 4});
  EXPECT_EQ(c.width(), 4);
  EXPECT_EQ(c.at(0, 0), 7);
  const Histogram h = histogram(f);
  EXPECT_EQ(h[100], 99u);
  EXPECT_EQ(h[7], 1u);
  EXPECT_EQ(median_intensity(h), 100.0);
  const GrayFrame s = shift_frame(f, 3, -1, 0);
  EXPECT_EQ(s.at(5, 2), 7);
}

}  // namespace
}  // namespace gazekit
