#include <gtest/gtest.h>

#include <cmath>

#include "arena_fixtures.hpp"
#include "emberpipe/dynamics.hpp"
#include "emberpipe/gnss.hpp"
#include "emberpipe/jet.hpp"
#include "emberpipe/sensors.hpp"

using namespace emberpipe;
using namespace emberpipe::sim;

namespace {

const Pose kSensor = Pose::from_translation(Vec3(0, 0, 1.5));

LidarConfig noiseless() {
  LidarConfig c;
  c.range_noise = 0.0;
  return c;
}

ArenaModel acrylic_fire_arena() {
  ArenaModel a;
  Facet back = fixtures::wall_facing_origin(2.5, 3.0, 4.0, "back");
  Facet panel = fixtures::wall_facing_origin(2.0, 0.5, 2.0, "panel");
  panel.corner = Vec3(2.0, -0.5, 0.5);
  panel.edge1 = Vec3(0, 0, 2.0);
  panel.edge2 = Vec3(0, 1.0, 0);
  panel.material = Material::Acrylic;
  a.walls = {back, panel};
  Hole h = fixtures::hole_at(Vec3(2.0, 0, 1.5), 0.15, true, "fire");
  h.enclosure = Enclosure::Acrylic;
  a.holes = {h};
  a.validate();
  return a;
}

}  // namespace

TEST(RenderLidar, WallRangesAreExact) {
  const auto arena = fixtures::wall_arena(2.0, {}, {});
  const auto cloud = render_lidar(arena, kSensor, noiseless(), 1);
  ASSERT_GT(cloud.size(), 1000u);
  std::size_t wall = 0;
  for (const auto& p : cloud.points) {
    const bool on_wall = std::abs(p.x() - 2.0) < 1e-9;
    const bool on_floor = std::abs(p.z() + 1.5) < 1e-9;
    EXPECT_TRUE(on_wall || on_floor) << p.transpose();
    if (on_wall && p.x() > 0) {
      ++wall;
      // Range equals the ray-plane distance 2 / cos(angle to the wall normal).
      EXPECT_NEAR(p.norm(), 2.0 / (p.normalized().x()), 1e-9);
    }
  }
  EXPECT_GT(wall, 100u);
}

TEST(RenderLidar, RaysThroughHoleReachRecessedPlate) {
  const auto arena = fixtures::wall_arena(2.0, {0.15}, {0.0});
  const auto cloud = render_lidar(arena, kSensor, noiseless(), 1);
  int inside = 0;
  for (const auto& p : cloud.points) {
    if (p.x() <= 0.0) continue;
    const Vec3 at_wall = p * (2.0 / p.x());  // ray crossing of the wall plane
    if (std::hypot(at_wall.y(), at_wall.z()) < 0.05) {
      ++inside;
      EXPECT_NEAR(p.x(), 2.1, 1e-9);
    }
  }
  EXPECT_GT(inside, 5);
}

TEST(RenderLidar, AcrylicPanelReturnsNothing) {
  const auto arena = acrylic_fire_arena();
  const auto cloud = render_lidar(arena, kSensor, noiseless(), 1);
  for (const auto& p : cloud.points) EXPECT_GT(std::abs(p.x() - 2.0), 1e-6) << p.transpose();
}

TEST(RenderLidar, DeterministicAndOnSurfaces) {
  const auto arena = fixtures::wall_arena(2.0, {0.15}, {0.0});
  LidarConfig cfg;
  cfg.range_noise = 0.01;
  const auto a = render_lidar(arena, kSensor, cfg, 7), b = render_lidar(arena, kSensor, cfg, 7);
  ASSERT_EQ(a.points, b.points);
  std::size_t within = 0;
  for (const auto& p : a.points) {
    EXPECT_LE(p.norm(), cfg.max_range);
    const double d = std::min({std::abs(p.x() - 2.0), std::abs(p.x() - 2.1), std::abs(p.z() + 1.5)});
    within += d <= 3.0 * cfg.range_noise;
  }
  EXPECT_GE(double(within) / double(a.size()), 0.996);
}

TEST(RenderThermal, PlateBlobMatchesPinholeSize) {
  const auto arena = fixtures::wall_arena(2.0, {0.15}, {0.0}, 1.5, true);
  const PinholeCamera cam;
  const auto img = render_thermal(arena, optical_frame(kSensor), cam, 1, 0.0);
  int area = 0, umin = 1000, umax = -1;
  double su = 0, sv = 0;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u)
      if (img.at(u, v) > 450.0) {
        ++area;
        su += u;
        sv += v;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
      }
  const double expected = cam.fx * 0.15 / 2.0;  // aperture at the wall plane limits the view
  EXPECT_NEAR(umax - umin + 1, expected, 1.5);
  EXPECT_NEAR(area, kPi * expected * expected / 4.0, 12.0);
  EXPECT_NEAR(su / area, cam.cx, 0.6);
  EXPECT_NEAR(sv / area, cam.cy, 0.6);
}

TEST(RenderThermal, NoHeatIsAmbient) {
  const auto arena = fixtures::wall_arena(2.0, {0.15}, {0.0});
  const auto img = render_thermal(arena, optical_frame(kSensor), PinholeCamera{}, 1, 0.0);
  EXPECT_EQ(*std::max_element(img.data.begin(), img.data.end()), arena.ambient_temp);
}

TEST(RenderThermal, AcrylicFireOffAxisStaysBelowThreshold) {
  const auto arena = acrylic_fire_arena();
  const Vec3 target(2.0, 0, 1.5);
  auto view_max = [&](double off_deg) {
    const double a = deg2rad(off_deg);
    const Vec3 cam_pos = target + 1.5 * Vec3(-std::cos(a), std::sin(a), 0.0);
    const Vec3 d = target - cam_pos;
    const Pose housing = Pose::from_position_yaw(cam_pos, std::atan2(d.y(), d.x()));
    const auto img = render_thermal(arena, optical_frame(housing), PinholeCamera{}, 1, 0.0);
    return *std::max_element(img.data.begin(), img.data.end());
  };
  EXPECT_GT(view_max(0.0), 500.0);
  EXPECT_LT(view_max(60.0), 400.0);
}

TEST(StepDynamics, Examples) {
  RobotState s;
  s.true_pose = Pose::from_position_yaw(Vec3(1, 2, 3), 0.4);
  const MotionLimits open;
  const auto still = step_dynamics(s, {}, open, 0.01);
  EXPECT_EQ(still.true_pose.translation, s.true_pose.translation);

  RobotState m = s;
  for (int i = 0; i < 200; ++i) m = step_dynamics(m, {VelocityCommand{Vec3(1, 0, 0), 0.0}}, open, 0.01);
  EXPECT_NEAR((m.true_pose.translation - s.true_pose.translation - Vec3(2, 0, 0)).norm(), 0.0, 1e-6);

  MotionLimits capped;
  capped.max_speed = Vec3::Constant(2.0);
  RobotState w;
  double t = 0.0;
  const WaypointCommand goal{Vec3(10, 0, 0), 0.0};
  while ((w.true_pose.translation - goal.position).norm() > 1e-3 && t < 60.0) {
    w = step_dynamics(w, {goal}, capped, 0.01);
    t += 0.01;
    EXPECT_LE(std::abs(w.velocity.x()), 2.0 + 1e-12);
  }
  EXPECT_GE(t, 5.0);
  EXPECT_THROW(step_dynamics(s, {}, open, 0.0), DegenerateInput);
}

TEST(StepDynamics, UgvStaysOnGround) {
  RobotState s;
  s.kind = RobotKind::Ugv;
  s.true_pose = Pose::from_position_yaw(Vec3(0, 0, 0.0), 0.0);
  MotionLimits lim;
  lim.max_speed = Vec3(0.5, 0.5, 0.5);
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const VelocityCommand v{Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)), rng.uniform(-1, 1)};
    s = step_dynamics(s, {v}, lim, 0.01);
    EXPECT_NEAR(s.true_pose.translation.z(), 0.0, 1e-9);
    EXPECT_NEAR(s.true_pose.roll(), 0.0, 1e-9);
    EXPECT_NEAR(s.true_pose.pitch(), 0.0, 1e-9);
  }
}

TEST(SimulateJet, LevelShotEntersHole) {
  const auto arena = fixtures::wall_arena(2.1, {0.15}, {0.0}, 1.5);
  JetModel jet;
  jet.exit_speed = level_shot_speed(2.1, 0.35);
  EXPECT_NEAR(jet.exit_speed, 2.1 * std::sqrt(9.81 / 0.7), 1e-12);
  jet.exit_pose = Pose::from_translation(Vec3(0, 0, 1.85));
  const auto r = simulate_jet(jet, arena, 10.0);
  ASSERT_TRUE(r.hole_hit);
  EXPECT_EQ(arena.holes[*r.hole_hit].id, "h0");
  EXPECT_NEAR(r.water_delivered, 1.0, 1e-12);
  EXPECT_NEAR(r.hit_point.z(), 1.5, 1e-9);

  jet.exit_pose = Pose::from_translation(Vec3(0, 0.5, 1.85));
  const auto miss = simulate_jet(jet, arena, 10.0);
  EXPECT_FALSE(miss.hole_hit);
  EXPECT_EQ(miss.water_delivered, 0.0);
  EXPECT_TRUE(miss.hit_surface);
}

TEST(SimulateJet, WaterNeverExceedsFlowTimesDuration) {
  const auto arena = fixtures::wall_arena(2.1, {0.15}, {0.0}, 1.5);
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    JetModel jet;
    jet.exit_speed = rng.uniform(5, 10);
    jet.exit_pose = Pose::from_xyz_rpy(0, rng.uniform(-0.1, 0.1), rng.uniform(1.6, 2.0), 0, rng.uniform(-0.1, 0.1),
                                       rng.uniform(-0.05, 0.05));
    const double dur = rng.uniform(0, 2);
    EXPECT_LE(simulate_jet(jet, arena, dur).water_delivered, jet.flow_rate * dur);
  }
}

TEST(Gnss, ZeroSigmaIsExact) {
  DriftState d;
  Rng rng(1);
  GnssParams p;
  p.sigma = 0.0;
  const Pose truth = Pose::from_position_yaw(Vec3(1, 2, 3), 0.3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(gnss_measure(truth, d, p, 0.1, rng, true).translation, truth.translation);
}

TEST(Gnss, RandomWalkVarianceLaw) {
  // Per-axis std after T seconds is sigma * sqrt(T / 3); the magnitude is
  // Maxwell distributed with mean 2 a sqrt(2 / pi) and RMS sigma * sqrt(T).
  auto run = [](bool near) {
    GnssParams p;
    double sum = 0.0, sq = 0.0;
    for (int seed = 0; seed < 1000; ++seed) {
      DriftState d;
      Rng rng(seed);
      for (int k = 0; k < 1000; ++k) gnss_measure(Pose{}, d, p, 0.1, rng, near);
      sum += d.offset.norm();
      sq += d.offset.squaredNorm();
    }
    return std::pair{sum / 1000.0, std::sqrt(sq / 1000.0)};
  };
  for (bool near : {false, true}) {
    const double sigma = 0.05 * (near ? 5.0 : 1.0);
    const auto [mean, rms] = run(near);
    const double a = sigma * std::sqrt(100.0 / 3.0);
    EXPECT_NEAR(rms, sigma * 10.0, 0.2 * sigma * 10.0);
    EXPECT_NEAR(mean, 2.0 * a * std::sqrt(2.0 / kPi), 0.1 * 2.0 * a * std::sqrt(2.0 / kPi));
  }
}

TEST(Gnss, InjectedStepShiftsMeasurement) {
  DriftState d;
  Rng rng(2);
  GnssParams p;
  p.sigma = 0.0;
  inject_step(d, Vec3(1.5, 0, 0));
  EXPECT_EQ(gnss_measure(Pose{}, d, p, 0.1, rng, false).translation, Vec3(1.5, 0, 0));
}
