#include <gtest/gtest.h>

#include <set>

#include "emberpipe/autonomy.hpp"
#include "emberpipe/rng.hpp"

using namespace emberpipe;
using namespace emberpipe::autonomy;

namespace {

UavParams square_route() {
  UavParams p;
  p.bounds = Aabb{Vec3(-20, -20, 0), Vec3(20, 20, 12)};
  p.z_min = 1.0;
  p.z_max = 6.0;
  p.home = Vec3(-10, -10, 3);
  p.route = {{Pose::from_position_yaw(Vec3(-8, 0, 3), 0.0), WaypointKind::Transfer},
             {Pose::from_position_yaw(Vec3(-5, 5, 3), 0.0), WaypointKind::Observation, 2.0},
             {Pose::from_position_yaw(Vec3(5, 5, 3), kPi), WaypointKind::Transfer}};
  return p;
}

// Target on a wall facing -x (normal (-1,0,0)), vehicle at (-3,0,3) facing +x.
filter::Estimate wall_target(double z = 2.0) { return {Vec3(0, 0, z), Vec3(-1, 0, 0)}; }

UavInputs seen(const Pose& at, double now, int admitted, filter::Estimate est = wall_target()) {
  UavInputs in;
  in.localized = at;
  in.estimate = est;
  in.phase = filter::Phase::Tracking;
  in.outcomes.assign(std::size_t(admitted), DetectionOutcome::Admitted);
  in.now = now;
  return in;
}

UavFsm extinguishing(const UavParams& p, double water = 1.0) {
  UavFsm f;
  f.water = water;
  const Pose at = Pose::from_position_yaw(Vec3(-3, 0, 3), 0.0);
  f = uav_step(f, seen(at, 1.0, 5), p, 0.05).first;
  EXPECT_EQ(f.state, UavState::Extinguish);
  return f;
}

bool is_hover(const sim::MotionCommand& m) { return std::holds_alternative<sim::HoverCommand>(m); }

}  // namespace

TEST(ExtinguishGoal, Examples) {
  const auto g = extinguish_goal({Vec3::Zero(), Vec3(1, 0, 0)});
  EXPECT_LT((g.translation - Vec3(2.1, 0, 0.35)).norm(), 1e-12);
  EXPECT_NEAR(std::abs(g.yaw()), kPi, 1e-12);
  const auto g2 = extinguish_goal({Vec3::Zero(), Vec3(0, 1, 0)});
  EXPECT_LT((g2.translation - Vec3(0, 2.1, 0.35)).norm(), 1e-12);
  EXPECT_NEAR(g2.yaw(), -kPi / 2, 1e-12);
  EXPECT_THROW(extinguish_goal({Vec3::Zero(), Vec3(0, 0, 1)}), DegenerateInput);
  const Vec3 tilted = Eigen::AngleAxisd(deg2rad(4.9), Vec3::UnitY()) * Vec3(0, 0, 1);
  EXPECT_THROW(extinguish_goal({Vec3::Zero(), tilted}), DegenerateInput);
  // Sloped normals use only their horizontal direction.
  const Vec3 sloped = Vec3(1, 0, 1).normalized();
  EXPECT_LT((extinguish_goal({Vec3::Zero(), sloped}).translation - Vec3(2.1, 0, 0.35)).norm(), 1e-12);
}

TEST(PumpLogic, ExamplesAndHysteresis) {
  const Pose goal = Pose::from_position_yaw(Vec3(1, 2, 3), 0.5);
  const double tol = 0.25, yaw_tol = deg2rad(10.0);
  EXPECT_TRUE(pump_logic(goal, goal, tol, yaw_tol, false));
  auto offset = [&](double k) {
    Pose p = goal;
    p.translation.x() += k * tol;
    return p;
  };
  EXPECT_FALSE(pump_logic(goal, offset(1.2), tol, yaw_tol, true));
  // Decay from 1.2x to 0.9x: stays off until <= 0.8x.
  bool on = true;
  std::vector<bool> trace;
  for (double k : {1.2, 1.1, 1.0, 0.9, 0.85, 0.8, 0.7, 0.95, 1.0, 1.05}) {
    on = pump_logic(goal, offset(k), tol, yaw_tol, on);
    trace.push_back(on);
  }
  const std::vector<bool> expected{false, false, false, false, false, true, true, true, true, false};
  EXPECT_EQ(trace, expected);
  Pose yawed = goal;
  yawed.rotation = Quat(Eigen::AngleAxisd(0.5 + deg2rad(10.5), Vec3::UnitZ()));
  EXPECT_FALSE(pump_logic(goal, yawed, tol, yaw_tol, true));
  EXPECT_THROW(pump_logic(goal, goal, 0.0, yaw_tol, true), DegenerateInput);
}

TEST(UavStep, FreshFsmFliesToFirstWaypoint) {
  const auto p = square_route();
  UavInputs in;
  in.localized = Pose::from_position_yaw(Vec3(-10, -10, 3), 0.0);
  const auto [f, cmd] = uav_step(UavFsm{}, in, p, 0.05);
  EXPECT_EQ(f.state, UavState::Search);
  const auto* w = std::get_if<sim::WaypointCommand>(&cmd.motion);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->position, Vec3(-8, 0, 3));
  EXPECT_FALSE(cmd.pump);
}

TEST(UavStep, ObservationWaypointHoversTwoSeconds) {
  const auto p = square_route();
  UavFsm f;
  f.waypoint = 1;
  UavInputs in;
  in.localized = p.route[1].pose;
  in.now = 10.0;
  f = uav_step(f, in, p, 0.05).first;
  ASSERT_TRUE(f.hover_until);
  EXPECT_EQ(*f.hover_until, 12.0);
  in.now = 11.99;
  f = uav_step(f, in, p, 0.05).first;
  EXPECT_EQ(f.waypoint, 1u);
  in.now = 12.0;
  const auto [g, cmd] = uav_step(f, in, p, 0.05);
  EXPECT_EQ(g.waypoint, 2u);
  EXPECT_EQ(std::get<sim::WaypointCommand>(cmd.motion).position, Vec3(5, 5, 3));
}

TEST(UavStep, ExtinguishEntryConditions) {
  const auto p = square_route();
  UavFsm fresh;
  fresh.water = 1.0;
  const Pose heading30 = Pose::from_position_yaw(Vec3(-3, 0, 3), deg2rad(30.0));
  // Five in a row at a legal altitude with a 30 degree heading angle.
  EXPECT_EQ(uav_step(fresh, seen(heading30, 1, 5), p, 0.05).first.state, UavState::Extinguish);
  // Four is not enough, and a rejection resets the streak.
  EXPECT_EQ(uav_step(fresh, seen(heading30, 1, 4), p, 0.05).first.state, UavState::Search);
  auto in = seen(heading30, 1, 4);
  in.outcomes.push_back(DetectionOutcome::Rejected);
  in.outcomes.push_back(DetectionOutcome::Admitted);
  auto r = uav_step(fresh, in, p, 0.05).first;
  EXPECT_EQ(r.state, UavState::Search);
  EXPECT_EQ(r.consecutive_detections, 1);
  // Neutral outcomes do not break the streak.
  in = seen(heading30, 1, 3);
  in.outcomes.push_back(DetectionOutcome::Neutral);
  in.outcomes.push_back(DetectionOutcome::Admitted);
  in.outcomes.push_back(DetectionOutcome::Admitted);
  EXPECT_EQ(uav_step(fresh, in, p, 0.05).first.state, UavState::Extinguish);
  // Altitude outside the corridor.
  EXPECT_EQ(uav_step(fresh, seen(heading30, 1, 5, wall_target(6.5)), p, 0.05).first.state, UavState::Search);
  // Heading angle just above 45 degrees.
  const Pose heading46 = Pose::from_position_yaw(Vec3(-3, 0, 3), deg2rad(45.0 + 1e-6));
  EXPECT_EQ(uav_step(fresh, seen(heading46, 1, 5), p, 0.05).first.state, UavState::Search);
  const Pose heading44 = Pose::from_position_yaw(Vec3(-3, 0, 3), deg2rad(45.0 - 1e-6));
  EXPECT_EQ(uav_step(fresh, seen(heading44, 1, 5), p, 0.05).first.state, UavState::Extinguish);
  // Not tracking.
  in = seen(heading30, 1, 5);
  in.phase = filter::Phase::Initializing;
  EXPECT_EQ(uav_step(fresh, in, p, 0.05).first.state, UavState::Search);
}

TEST(UavStep, ExtinguishGoalAndPump) {
  const auto p = square_route();
  UavFsm f = extinguishing(p);
  ASSERT_TRUE(f.goal);
  EXPECT_LT((f.goal->translation - Vec3(-2.1, 0, 2.35)).norm(), 1e-12);
  // At the goal: pump on, water decreases by flow * dt.
  const auto [g, cmd] = uav_step(f, seen(*f.goal, 1.05, 1), p, 0.05);
  EXPECT_TRUE(cmd.pump);
  EXPECT_NEAR(g.water, 1.0 - 0.1 * 0.05, 1e-15);
  EXPECT_EQ(cmd.volume, 0.1 * 0.05);
}

TEST(UavStep, LossTimeoutReturnsToSearch) {
  const auto p = square_route();
  UavFsm f = extinguishing(p);
  UavInputs in;
  in.localized = Pose::from_position_yaw(Vec3(-2.1, 0, 2.35), 0.0);
  in.phase = filter::Phase::Initializing;
  in.now = 1.0 + 4.9;
  EXPECT_EQ(uav_step(f, in, p, 0.05).first.state, UavState::Extinguish);
  in.now = 1.0 + 5.1;
  const auto lost = uav_step(f, in, p, 0.05).first;
  EXPECT_EQ(lost.state, UavState::Search);
  EXPECT_FALSE(lost.pump_on);
}

TEST(UavStep, WaterExhaustedReturnsHome) {
  const auto p = square_route();
  UavFsm f = extinguishing(p, 0.012);
  double delivered = 0.0;
  double t = 1.0;
  for (int i = 0; i < 10 && f.state == UavState::Extinguish; ++i) {
    t += 0.05;
    const auto [g, cmd] = uav_step(f, seen(*f.goal, t, 1), p, 0.05);
    delivered += cmd.volume;
    f = g;
  }
  EXPECT_EQ(f.state, UavState::ReturnHome);
  EXPECT_EQ(f.water, 0.0);
  EXPECT_NEAR(delivered, 0.012, 1e-15);
  const auto [h, cmd] = uav_step(f, seen(Pose{}, t + 0.05, 1), p, 0.05);
  EXPECT_EQ(std::get<sim::WaypointCommand>(cmd.motion).position, p.home);
  EXPECT_FALSE(cmd.pump);
}

TEST(UavStep, JumpForcesStopFromEveryState) {
  const auto p = square_route();
  std::vector<UavFsm> states;
  UavFsm search;
  search.water = 1.0;
  states.push_back(search);
  UavFsm hovering = search;
  hovering.hover_until = 3.0;
  states.push_back(hovering);
  UavFsm ext = extinguishing(p);
  states.push_back(ext);
  UavFsm pumping = ext;
  pumping.pump_on = true;
  states.push_back(pumping);
  UavFsm home = search;
  home.state = UavState::ReturnHome;
  states.push_back(home);
  UavFsm stop = search;
  stop.state = UavState::Stop;
  states.push_back(stop);
  std::set<UavState> covered;
  for (const auto& s0 : states) {
    covered.insert(s0.state);
    for (int outcomes = 0; outcomes <= 6; ++outcomes) {
      for (bool tracking : {false, true}) {
        auto in = seen(Pose::from_position_yaw(Vec3(-2.1, 0, 2.35), 0.0), 2.0, outcomes);
        in.phase = tracking ? filter::Phase::Tracking : filter::Phase::Initializing;
        in.jump = true;
        const auto [s1, cmd] = uav_step(s0, in, p, 0.05);
        EXPECT_EQ(s1.state, UavState::Stop);
        EXPECT_TRUE(is_hover(cmd.motion));
        EXPECT_FALSE(cmd.pump);
        EXPECT_EQ(cmd.volume, 0.0);
        // Stop is absorbing and hover-only.
        in.jump = false;
        const auto [s2, cmd2] = uav_step(s1, in, p, 0.05);
        EXPECT_EQ(s2.state, UavState::Stop);
        EXPECT_TRUE(is_hover(cmd2.motion));
        EXPECT_FALSE(cmd2.pump);
        EXPECT_EQ(s2.water, s0.water);
      }
    }
  }
  EXPECT_EQ(covered.size(), 4u);
}

TEST(UavStep, CommandsStayInsideBoundsAndCorridor) {
  auto p = square_route();
  p.route.push_back({Pose::from_position_yaw(Vec3(30, 0, 20), 0.0), WaypointKind::Transfer});
  Rng rng(3);
  UavFsm f;
  f.water = 5.0;
  for (int i = 0; i < 5000; ++i) {
    UavInputs in;
    in.localized = Pose::from_position_yaw(Vec3(rng.uniform(-25, 25), rng.uniform(-25, 25), rng.uniform(0, 15)),
                                           rng.uniform(-kPi, kPi));
    in.estimate = filter::Estimate{Vec3(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-2, 14)),
                                   Vec3(rng.normal(), rng.normal(), 0.3 * rng.normal()).normalized()};
    in.phase = rng.uniform(0, 1) < 0.7 ? filter::Phase::Tracking : filter::Phase::Initializing;
    in.outcomes.assign(rng.index(3), DetectionOutcome::Admitted);
    in.now = 0.05 * i;
    const int before = f.consecutive_detections;
    const auto [g, cmd] = uav_step(f, in, p, 0.05);
    if (g.state == UavState::Extinguish && f.state == UavState::Search) EXPECT_GE(g.consecutive_detections, 5);
    (void)before;
    if (const auto* w = std::get_if<sim::WaypointCommand>(&cmd.motion)) {
      EXPECT_TRUE(p.bounds.contains(w->position));
      EXPECT_GE(w->position.z(), p.z_min);
      EXPECT_LE(w->position.z(), p.z_max);
    }
    f = g.state == UavState::ReturnHome ? UavFsm{} : g;
    if (f.water == 0.0) f.water = 5.0;
  }
}

TEST(ScanMotion, PerimeterTraversal) {
  const ScanRect r{0.6, 0.4, 8.0};
  EXPECT_LT((scan_motion(0.0, r) - Vec3(0, 0.3, -0.2)).norm(), 1e-12);
  // Quarter period covers a quarter of the 2.0 m perimeter: 0.5 m along the bottom edge.
  EXPECT_LT((scan_motion(2.0, r) - Vec3(0, -0.2, -0.2)).norm(), 1e-12);
  EXPECT_LT((scan_motion(8.0, r) - scan_motion(0.0, r)).norm(), 1e-9);
  EXPECT_LT((scan_motion(4.0, r) - Vec3(0, -0.3, 0.2)).norm(), 1e-12);
  // Constant speed: equal time steps give equal path length.
  double prev_len = -1;
  for (int i = 0; i < 80; ++i) {
    const double len = (scan_motion(0.1 * (i + 1), r) - scan_motion(0.1 * i, r)).lpNorm<1>();
    if (prev_len >= 0) EXPECT_NEAR(len, prev_len, 1e-9);
    prev_len = len;
  }
  EXPECT_THROW(scan_motion(0.0, ScanRect{1, 1, 0}), DegenerateInput);
}

TEST(SprayPattern, HourglassProperties) {
  const double A = deg2rad(3.0), T = 4.0;
  const auto c = spray_pattern(0.0, A, T);
  EXPECT_EQ(c.pitch, 0.0);
  EXPECT_EQ(c.yaw, 0.0);
  double max_yaw = 0.0, max_pitch = 0.0;
  int center_visits = 0;
  const int n = 4000;  // 1 kHz over one period
  for (int i = 0; i < n; ++i) {
    const auto s = spray_pattern(T * i / n, A, T);
    max_yaw = std::max(max_yaw, std::abs(s.yaw));
    max_pitch = std::max(max_pitch, std::abs(s.pitch));
    if (std::hypot(s.yaw, s.pitch) < 1e-12) ++center_visits;
  }
  EXPECT_NEAR(max_yaw, A, 1e-9);
  EXPECT_LE(max_pitch, A);
  // The curve passes through the center twice per period: one self-intersection.
  EXPECT_EQ(center_visits, 2);
  // Brute-force crossing search: the only point visited at two distinct times is the center.
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < n; ++i) {
    const auto s = spray_pattern(T * i / n, A, T);
    pts.emplace_back(s.yaw, s.pitch);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (std::abs(pts[i].first - pts[j].first) < 1e-12 && std::abs(pts[i].second - pts[j].second) < 1e-12)
        EXPECT_LT(std::hypot(pts[i].first, pts[i].second), 1e-12);
}

TEST(AimStep, FixedPointAndIncrements) {
  ArmModel arm;
  const Vec3 target(1.6, 0.1, 0.6);
  const Pose sol = aim_solution(target, arm);
  EXPECT_LT(translation_distance(aim_step(target, sol, arm), sol), 1e-12);
  // The arc from the solution pose passes through the target.
  const Vec3 f = sol.forward();
  const double horiz = Vec2(target.x() - sol.translation.x(), target.y() - sol.translation.y()).norm();
  EXPECT_NEAR(horiz, arm.standoff, 1e-12);
  const double vh = arm.exit_speed * Vec2(f.x(), f.y()).norm();
  const double t = horiz / vh;
  const double z = sol.translation.z() + arm.exit_speed * f.z() * t - 0.5 * arm.gravity * t * t;
  EXPECT_NEAR(z, target.z(), 1e-9);

  Pose nozzle = sol;
  nozzle.translation += Vec3(0.35, 0, 0);
  std::vector<double> steps;
  for (int i = 0; i < 5; ++i) {
    const Pose next = aim_step(target, nozzle, arm);
    steps.push_back(translation_distance(next, nozzle));
    nozzle = next;
  }
  EXPECT_NEAR(steps[0], 0.10, 1e-12);
  EXPECT_NEAR(steps[1], 0.10, 1e-12);
  EXPECT_NEAR(steps[2], 0.10, 1e-12);
  EXPECT_NEAR(steps[3], 0.05, 1e-12);
  EXPECT_NEAR(steps[4], 0.0, 1e-12);
  EXPECT_THROW(aim_solution(Vec3(1.6, 0, 1.51), arm), Unreachable);
  EXPECT_THROW(aim_solution(Vec3(5.0, 0, 0.5), arm), Unreachable);
}

namespace {

UgvParams kitchen_slots() {
  UgvParams p;
  for (int k = 0; k < 2; ++k) {
    FireSlot s;
    s.id = "fire" + std::to_string(k + 1);
    s.approach = {{Pose::from_position_yaw(Vec3(0, 3.0 * k, 0), 0.0), WaypointKind::Transfer}};
    s.scan_arm = Pose::from_xyz_rpy(0.7, 0, 0.6, 0, 0, 0);
    s.rect = ScanRect{0.6, 0.4, 8.0};
    p.slots.push_back(s);
  }
  p.flow_rate = 0.1;
  return p;
}

struct UgvTrace {
  UgvFsm fsm;
  std::vector<UgvState> states;
  double delivered = 0.0;
  double phase1 = 0.0;
  double max_aim_step = 0.0;
};

// Closed loop with an ideal base and an arm that reaches each target in one step.
UgvTrace run_ugv(const UgvParams& p, std::optional<Vec3> fire_at_slot1, double dt = 0.05, double t_max = 300) {
  UgvTrace tr;
  tr.fsm.water = 10.0;
  Pose base = Pose::from_position_yaw(Vec3(0, 0, 0), 0.0);
  Pose arm = p.slots[0].scan_arm;
  for (double t = 0; t < t_max && tr.fsm.state != UgvState::Done; t += dt) {
    UgvInputs in;
    in.localized = base;
    in.arm_pose = arm;
    in.now = t;
    if (fire_at_slot1 && tr.fsm.slot == 0 && tr.fsm.state != UgvState::Drive) {
      // Visible once the wrist sweeps past y < 0.
      if (tr.fsm.state != UgvState::ScanArm || arm.translation.y() < 0.0) in.heat = *fire_at_slot1;
    }
    const auto [next, cmd] = ugv_step(tr.fsm, in, p, dt);
    if (const auto* w = std::get_if<sim::WaypointCommand>(&cmd.base)) base = Pose::from_position_yaw(w->position, w->yaw);
    if (cmd.arm) {
      if (next.state == UgvState::Aim && tr.fsm.state == UgvState::Aim)
        tr.max_aim_step = std::max(tr.max_aim_step, translation_distance(*cmd.arm, arm));
      arm = *cmd.arm;
    }
    tr.delivered += cmd.volume;
    if (tr.fsm.state == UgvState::SprayPhase1) {
      tr.phase1 += cmd.volume;
      EXPECT_TRUE(!cmd.arm || translation_distance(*cmd.arm, *tr.fsm.aim_pose) < 1e-12);
      EXPECT_TRUE(!cmd.arm || rotation_distance(*cmd.arm, *tr.fsm.aim_pose) < 1e-12);
    }
    if (tr.states.empty() || tr.states.back() != next.state) tr.states.push_back(next.state);
    tr.fsm = next;
  }
  return tr;
}

}  // namespace

TEST(UgvStep, HeatMidRectangleEntersAimWithinOneStep) {
  const auto p = kitchen_slots();
  UgvFsm f;
  f.state = UgvState::ScanArm;
  f.state_start = 0.0;
  UgvInputs in;
  in.now = 3.0;
  in.arm_pose = p.slots[0].scan_arm;
  EXPECT_EQ(ugv_step(f, in, p, 0.05).first.state, UgvState::ScanArm);
  in.heat = Vec3(1.6, 0, 0.6);
  const auto [g, cmd] = ugv_step(f, in, p, 0.05);
  EXPECT_EQ(g.state, UgvState::Aim);
  ASSERT_TRUE(cmd.arm);
}

TEST(UgvStep, NoHeatProceedsToNextFire) {
  const auto p = kitchen_slots();
  const auto tr = run_ugv(p, std::nullopt);
  EXPECT_EQ(tr.fsm.state, UgvState::Done);
  EXPECT_EQ(tr.delivered, 0.0);
  const std::vector<UgvState> expected{UgvState::ScanArm, UgvState::Drive, UgvState::ScanArm, UgvState::Done};
  EXPECT_EQ(tr.states, expected);
}

TEST(UgvStep, FullProcedureAtFirstSlotThenSecond) {
  const auto p = kitchen_slots();
  const auto tr = run_ugv(p, Vec3(1.6, 0.1, 0.55));
  EXPECT_EQ(tr.fsm.state, UgvState::Done);
  const std::vector<UgvState> expected{UgvState::ScanArm,     UgvState::Aim,   UgvState::SprayPhase1,
                                       UgvState::SprayPhase2, UgvState::Drive, UgvState::ScanArm,
                                       UgvState::Done};
  EXPECT_EQ(tr.states, expected);
  EXPECT_LE(tr.max_aim_step, 0.10 + 1e-12);
  EXPECT_NEAR(tr.phase1, 0.5 * p.water_per_fire, p.flow_rate * 0.05);
  EXPECT_NEAR(tr.delivered, p.water_per_fire, p.flow_rate * 0.05);
  EXPECT_LE(tr.delivered, 8.0);
  EXPECT_NEAR(tr.fsm.water + tr.delivered, 10.0, 1e-12);
}

TEST(UgvStep, UnreachableTargetSkipsToNextFire) {
  const auto p = kitchen_slots();
  const auto tr = run_ugv(p, Vec3(1.6, 0.1, 2.0));
  EXPECT_EQ(tr.fsm.state, UgvState::Done);
  EXPECT_EQ(tr.delivered, 0.0);
}
