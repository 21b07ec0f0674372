#include <gtest/gtest.h>

#include <cmath>

#include "arena_fixtures.hpp"
#include "emberpipe/holes.hpp"

using namespace emberpipe;
using namespace emberpipe::holes;

namespace {

// Independent oracle: exhaustive score of every integer (cx, cy, r) using the
// boundary definition from first principles.
struct BruteCircle {
  int cx = 0, cy = 0, r = 0;
  double score = -1.0;
};

bool oracle_boundary(const RasterPlaneImage& img, int x, int y) {
  if (!img.in_bounds(x, y) || img.at(x, y)) return false;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int k = 0; k < 4; ++k)
    if (img.in_bounds(x + dx[k], y + dy[k]) && img.at(x + dx[k], y + dy[k])) return true;
  return false;
}

BruteCircle brute_force_best(const RasterPlaneImage& img, int r_min, int r_max) {
  BruteCircle best;
  for (int r = r_min; r <= r_max; ++r)
    for (int cy = 0; cy < img.height; ++cy)
      for (int cx = 0; cx < img.width; ++cx) {
        if (img.at(cx, cy)) continue;
        const int n = std::max(16, int(std::ceil(2 * M_PI * (r - 0.5))));
        int hit = 0;
        for (int k = 0; k < n; ++k) {
          const double a = 2 * M_PI * k / n;
          const int sx = int(std::lround(cx + (r - 0.5) * std::cos(a)));
          const int sy = int(std::lround(cy + (r - 0.5) * std::sin(a)));
          bool f = false;
          for (int oy = -1; oy <= 1; ++oy)
            for (int ox = -1; ox <= 1; ++ox) f = f || oracle_boundary(img, sx + ox, sy + oy);
          hit += f;
        }
        const double s = double(hit) / n;
        if (s > best.score) best = {cx, cy, r, s};
      }
  return best;
}

RasterPlaneImage solid(int w, int h) {
  RasterPlaneImage img(w, h, 0.01);
  std::fill(img.occupancy.begin(), img.occupancy.end(), 1);
  return img;
}

void stamp_disk(RasterPlaneImage& img, double cx, double cy, double r) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r) img.at(x, y) = 0;
}

PlaneModel plane_of_all(const PointCloud& cloud, const Vec3& n, double d) {
  PlaneModel pl;
  pl.normal = n;
  pl.offset = d;
  for (std::size_t i = 0; i < cloud.size(); ++i) pl.inliers.push_back(i);
  return pl;
}

}  // namespace

TEST(RasterizePlane, DenseGridFillsEveryCorePixel) {
  PointCloud cloud;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) cloud.points.emplace_back(0.05 * i, 0.05 * j, 0.0);
  const auto img = rasterize_plane(plane_of_all(cloud, Vec3::UnitZ(), 0.0), cloud, 0.05);
  EXPECT_EQ(img.width, 10 + 2 * kRasterPadding);
  EXPECT_EQ(img.height, 10 + 2 * kRasterPadding);
  for (int y = kRasterPadding; y < img.height - kRasterPadding; ++y)
    for (int x = kRasterPadding; x < img.width - kRasterPadding; ++x) EXPECT_EQ(img.at(x, y), 1);
  EXPECT_EQ(img.count_occupied(), 100u);
}

TEST(RasterizePlane, RemovedDiskLeavesMatchingUnoccupiedArea) {
  const double res = 0.01, r = 0.075;
  PointCloud cloud;
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j <= 60; ++j) {
      const Vec3 p(0.3 + res * i, -0.3 + res * j, 2.0);
      if (std::hypot(p.x() - 0.6, p.y()) < r) continue;
      cloud.points.push_back(p);
    }
  const auto img = rasterize_plane(plane_of_all(cloud, Vec3::UnitZ(), 2.0), cloud, res);
  const std::size_t expected_empty = 61 * 61 - cloud.size();
  const std::size_t core = std::size_t(img.width - 4) * (img.height - 4);
  EXPECT_EQ(core - img.count_occupied(), expected_empty);
  // Disk of radius r/res pixels: pi * 7.5^2 ~ 176.7 px, lattice count within a few pixels.
  EXPECT_NEAR(double(expected_empty), M_PI * std::pow(r / res, 2), 12.0);
}

TEST(RasterizePlane, RoundTripWithinOnePixel) {
  PointCloud cloud;
  const Vec3 n = Vec3(1, 1, 0.2).normalized();
  const Vec3 u = any_perpendicular(n), v = n.cross(u);
  Rng rng(3);
  for (int k = 0; k < 500; ++k) cloud.points.push_back(n * 1.5 + rng.uniform(-1, 1) * u + rng.uniform(-1, 1) * v);
  const auto img = rasterize_plane(plane_of_all(cloud, n, 1.5), cloud, 0.02);
  for (const auto& p : cloud.points) {
    const Vec2 px = img.to_pixel(p);
    const int i = int(std::lround(px.x())), j = int(std::lround(px.y()));
    ASSERT_TRUE(img.in_bounds(i, j));
    EXPECT_EQ(img.at(i, j), 1);
    EXPECT_LT((img.from_pixel(px) - p).norm(), 1e-9);
  }
}

TEST(RasterizePlane, CollinearPointsAreDegenerate) {
  PointCloud cloud;
  for (int i = 0; i < 3; ++i) cloud.points.emplace_back(0.1 * i, 0, 0);
  EXPECT_THROW(rasterize_plane(plane_of_all(cloud, Vec3::UnitZ(), 0.0), cloud, 0.01), DegenerateInput);
}

TEST(CloseGaps, SolidUnchangedAndEmptyStaysEmpty) {
  auto img = solid(20, 15);
  EXPECT_EQ(close_gaps(img, 2).occupancy, img.occupancy);
  RasterPlaneImage empty(20, 15, 0.01);
  EXPECT_EQ(close_gaps(empty, 2).count_occupied(), 0u);
  EXPECT_THROW(close_gaps(empty, 0), DegenerateInput);
}

TEST(CloseGaps, CheckerboardRadiusOneFillsCompletely) {
  RasterPlaneImage img(17, 13, 0.01);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) img.at(x, y) = (x + y) % 2;
  // Every pixel has a 4-neighbour set, so dilation by the radius-1 cross fills
  // everything; erosion of a full image with occupied borders is a no-op.
  const auto out = close_gaps(img, 1);
  EXPECT_EQ(out.count_occupied(), std::size_t(img.width) * img.height);
}

TEST(CloseGaps, LargeHoleSurvives) {
  auto img = solid(60, 60);
  stamp_disk(img, 30, 30, 8);
  const auto out = close_gaps(img, 2);
  EXPECT_EQ(out.at(30, 30), 0);
  EXPECT_EQ(out.at(30 + 7, 30), 0);
}

TEST(DetectCircles, StampedDiskMatchesBruteForce) {
  auto img = solid(48, 44);
  stamp_disk(img, 23, 21, 8);
  const auto oracle = brute_force_best(img, 5, 11);
  const auto found = detect_circles(img, 5, 11);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_NEAR(found[0].radius, 8.0, 1.0);
  EXPECT_LE((found[0].center - Vec2(23, 21)).norm(), 1.0);
  EXPECT_LE((found[0].center - Vec2(oracle.cx, oracle.cy)).norm(), 1.0);
  EXPECT_NEAR(found[0].radius, oracle.r, 1.0);
  EXPECT_GE(oracle.score, 0.6);
}

TEST(DetectCircles, BorderNotchIsRejected) {
  auto img = solid(36, 36);
  for (int y = 15; y < 21; ++y)
    for (int x = 0; x < 6; ++x) img.at(x, y) = 0;
  EXPECT_TRUE(detect_circles(img, 6, 10).empty());
  EXPECT_LT(brute_force_best(img, 6, 10).score, 0.6);
}

TEST(DetectCircles, EmptyImageYieldsNothing) {
  RasterPlaneImage img(30, 30, 0.01);
  EXPECT_TRUE(detect_circles(img, 3, 8).empty());
  EXPECT_THROW(detect_circles(img, 1, 8), DegenerateInput);
}

TEST(DetectCircles, DiskWithChannelToBorderStillDetected) {
  auto img = solid(60, 60);
  stamp_disk(img, 30, 30, 8);
  for (int y = 27; y < 34; ++y)
    for (int x = 30; x < 60; ++x) img.at(x, y) = 0;
  const auto found = detect_circles(img, 5, 11);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_LE((found[0].center - Vec2(30, 30)).norm(), 1.0);
}

class WallScan : public ::testing::Test {
 protected:
  static std::vector<HoleDetection> scan(const sim::ArenaModel& arena, std::uint64_t seed,
                                         const HoleDetectorParams& params = {}) {
    const Pose sensor = Pose::from_translation(Vec3(0, 0, 1.5));
    const auto cloud = sim::render_lidar(arena, sensor, sim::LidarConfig{}, seed);
    return detect_holes(cloud, sensor, params);
  }
};

TEST_F(WallScan, SingleHoleAtTwoMeters) {
  const auto arena = fixtures::wall_arena(2.0, {0.15}, {0.0});
  const auto dets = scan(arena, 1);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_LE((dets[0].position - arena.holes[0].center).norm(), 0.02);
  EXPECT_NEAR(dets[0].diameter, 0.15, 0.02);
  EXPECT_LE(rad2deg(angle_between(dets[0].normal, Vec3(-1, 0, 0))), 5.0);
  EXPECT_NEAR(dets[0].normal.norm(), 1.0, 1e-12);
}

TEST_F(WallScan, OversizedHoleIsGated) {
  const auto arena = fixtures::wall_arena(2.0, {0.40}, {0.0});
  EXPECT_TRUE(scan(arena, 1).empty());
}

TEST_F(WallScan, TwoHolesMatchedOneToOne) {
  const auto arena = fixtures::wall_arena(2.0, {0.15, 0.15}, {-0.5, 0.5});
  const auto dets = scan(arena, 4);
  ASSERT_EQ(dets.size(), 2u);
  for (const auto& h : arena.holes) {
    int matched = 0;
    for (const auto& d : dets) matched += (d.position - h.center).norm() <= 0.03;
    EXPECT_EQ(matched, 1) << h.id;
  }
}

TEST_F(WallScan, CentersLieOnSupportingPlaneAndGateIsExact) {
  const auto arena = fixtures::wall_arena(2.5, {0.15, 0.11}, {-0.6, 0.6});
  HoleDetectorParams params;
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    for (const auto& d : scan(arena, seed, params)) {
      EXPECT_LE(d.support_plane.distance(d.position), params.ransac.dist_threshold);
      EXPECT_GE(d.diameter, params.min_diameter);
      EXPECT_LE(d.diameter, params.max_diameter);
    }
}

TEST_F(WallScan, DeterministicUnderFixedSeed) {
  const auto arena = fixtures::wall_arena(2.2, {0.15}, {0.3});
  const auto a = scan(arena, 9), b = scan(arena, 9);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].position, b[i].position);
    EXPECT_EQ(a[i].diameter, b[i].diameter);
  }
}
