#pragma once

// Mission state machines. The UAV flies a waypoint cycle, switches to a
// relative-navigation extinguish approach once a target is confirmed, and
// drops into a hover-only Stop on localization jumps. The UGV drives to two
// fixed fire slots, scans with the arm, aims in bounded increments and sprays
// its per-fire budget in a still phase followed by an hourglass phase.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emberpipe/dynamics.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/jet.hpp"
#include "emberpipe/target_filter.hpp"

namespace emberpipe::autonomy {

// ---------------------------------------------------------------------------
// Shared helpers

enum class WaypointKind { Transfer, Observation };

inline const char* to_string(WaypointKind k) { return k == WaypointKind::Transfer ? "transfer" : "observation"; }

struct Waypoint {
  Pose pose;  // field frame
  WaypointKind kind = WaypointKind::Transfer;
  double hover_duration = 2.0;  // observation only
};

/// Pump gate with re-engagement hysteresis: stays on while within the
/// tolerances, re-engages only within `rearm` times the tolerances.
inline bool pump_logic(const Pose& goal, const Pose& current, double pos_tol, double yaw_tol, bool pump_on,
                       double rearm = 0.8) {
  if (!(pos_tol > 0.0) || !(yaw_tol > 0.0)) throw DegenerateInput("pump_logic: tolerances must be > 0");
  const double pos_err = translation_distance(goal, current);
  const double yaw_err = std::abs(wrap_angle(goal.yaw() - current.yaw()));
  const double scale = pump_on ? 1.0 : rearm;
  return pos_err <= scale * pos_tol && yaw_err <= scale * yaw_tol;
}

// ---------------------------------------------------------------------------
// UAV

enum class UavState { Search, Extinguish, Stop, ReturnHome };

inline const char* to_string(UavState s) {
  switch (s) {
    case UavState::Search: return "search";
    case UavState::Extinguish: return "extinguish";
    case UavState::Stop: return "stop";
    case UavState::ReturnHome: return "return-home";
  }
  return "?";
}

/// Outcome of one detection through the filter, as seen by the streak counter.
enum class DetectionOutcome { Admitted, Rejected, Neutral };

/// Admissions into H (or the initializing batch) extend the streak; gate
/// rejections reset it; buffering, suppression and not-tracking leave it alone.
inline DetectionOutcome classify(const filter::IngestResult& r) {
  using namespace filter::reason;
  if (r.reason == kAdmitted || r.reason == kInitialized) return DetectionOutcome::Admitted;
  if (r.reason == kBuffered || r.reason == kThermalSuppressedByHole || r.reason == kNotTracking)
    return DetectionOutcome::Neutral;
  return DetectionOutcome::Rejected;
}

struct UavParams {
  std::vector<Waypoint> route;
  Aabb bounds{Vec3::Constant(-1e9), Vec3::Constant(1e9)};
  double z_min = 0.5;  // altitude corridor
  double z_max = 10.0;
  Vec3 home = Vec3::Zero();  // hover point above the start position
  double arrival_tolerance = 0.2;
  int required_streak = 5;
  double max_heading_angle = deg2rad(45.0);
  double loss_timeout = 5.0;
  double standoff = 2.1;
  double height_offset = 0.35;
  double pos_tol = 0.25;
  double yaw_tol = deg2rad(10.0);
  double rearm_fraction = 0.8;
  double flow_rate = 0.1;  // liters per second while pumping
};

struct UavFsm {
  UavState state = UavState::Search;
  int consecutive_detections = 0;
  std::optional<Pose> goal;
  double water = 0.0;  // liters remaining
  std::size_t waypoint = 0;
  std::optional<double> hover_until;
  bool pump_on = false;
  double last_detection_time = 0.0;
  std::optional<Pose> hold;  // Stop hover position
  std::string reason;
};

struct UavInputs {
  Pose localized;  // field frame
  std::optional<filter::Estimate> estimate;
  filter::Phase phase = filter::Phase::Initializing;
  std::vector<DetectionOutcome> outcomes;  // since the previous step, in order
  bool jump = false;
  double now = 0.0;
};

struct UavCommand {
  sim::MotionCommand motion = sim::HoverCommand{};
  bool pump = false;
  double volume = 0.0;  // liters pumped this step
};

/// Goal pose `standoff` along the horizontal target normal and
/// `height_offset` above the target, yawed to face it.
inline Pose extinguish_goal(const filter::Estimate& target, double standoff = 2.1, double height_offset = 0.35) {
  const Vec3 n = target.normal.normalized();
  const Vec3 h(n.x(), n.y(), 0.0);
  if (h.norm() < std::sin(deg2rad(5.0))) throw DegenerateInput("extinguish_goal: target normal is near vertical");
  const Vec3 dir = h.normalized();
  const Vec3 pos = target.position + standoff * dir + Vec3(0, 0, height_offset);
  return Pose::from_position_yaw(pos, std::atan2(-dir.y(), -dir.x()));
}

/// Water pumped in a step of `dt` given the remaining amount.
inline double pumped_volume(double remaining, double flow_rate, double dt) {
  return std::min(remaining, flow_rate * dt);
}

namespace detail {

inline Vec3 clip_to(const UavParams& p, const Vec3& x) {
  Vec3 out = x.cwiseMax(p.bounds.min).cwiseMin(p.bounds.max);
  out.z() = std::clamp(out.z(), std::max(p.z_min, p.bounds.min.z()), std::min(p.z_max, p.bounds.max.z()));
  return out;
}

inline sim::MotionCommand goto_cmd(const UavParams& p, const Vec3& x, double yaw) {
  return sim::WaypointCommand{clip_to(p, x), wrap_angle(yaw)};
}

// Horizontal angle between the vehicle heading and the direction into the target surface.
inline double heading_to_target_angle(const Pose& vehicle, const filter::Estimate& est) {
  const Vec3 f = vehicle.forward();
  const Vec2 heading(f.x(), f.y());
  const Vec2 into(-est.normal.x(), -est.normal.y());
  if (heading.norm() < 1e-9 || into.norm() < 1e-9) return kPi;
  return std::acos(std::clamp(heading.normalized().dot(into.normalized()), -1.0, 1.0));
}

}  // namespace detail

/// One FSM step. Pure: all state lives in `fsm` and `in`.
inline std::pair<UavFsm, UavCommand> uav_step(const UavFsm& fsm, const UavInputs& in, const UavParams& params,
                                               double dt) {
  if (!(dt > 0.0)) throw DegenerateInput("uav_step: dt must be > 0");
  UavFsm s = fsm;
  UavCommand cmd;
  s.reason.clear();

  if (s.state == UavState::Stop || in.jump) {
    if (s.state != UavState::Stop) {
      s.state = UavState::Stop;
      s.hold = in.localized;
      s.reason = "localization-jump";
    }
    s.pump_on = false;
    s.goal.reset();
    return {s, cmd};  // hover
  }

  for (auto o : in.outcomes) {
    if (o == DetectionOutcome::Admitted) {
      ++s.consecutive_detections;
      s.last_detection_time = in.now;
    } else if (o == DetectionOutcome::Rejected) {
      s.consecutive_detections = 0;
    }
  }

  auto search_command = [&]() {
    if (params.route.empty()) return;  // hover
    const Waypoint& wp = params.route[s.waypoint % params.route.size()];
    if (s.hover_until) {
      if (in.now >= *s.hover_until) {
        s.hover_until.reset();
        s.waypoint = (s.waypoint + 1) % params.route.size();
      }
    } else if (translation_distance(in.localized, wp.pose) <= params.arrival_tolerance) {
      if (wp.kind == WaypointKind::Observation) {
        s.hover_until = in.now + wp.hover_duration;
      } else {
        s.waypoint = (s.waypoint + 1) % params.route.size();
      }
    }
    const Waypoint& target = params.route[s.waypoint % params.route.size()];
    cmd.motion = detail::goto_cmd(params, target.pose.translation, target.pose.yaw());
  };

  if (s.state == UavState::Search) {
    const bool confirmed = in.phase == filter::Phase::Tracking && in.estimate &&
                           s.consecutive_detections >= params.required_streak &&
                           in.estimate->position.z() >= params.z_min && in.estimate->position.z() <= params.z_max &&
                           detail::heading_to_target_angle(in.localized, *in.estimate) <= params.max_heading_angle;
    if (!confirmed) {
      search_command();
      return {s, cmd};
    }
    s.state = UavState::Extinguish;
    s.hover_until.reset();
    s.reason = "target-confirmed";
  }

  if (s.state == UavState::Extinguish) {
    if (in.now - s.last_detection_time > params.loss_timeout) {
      s.state = UavState::Search;
      s.pump_on = false;
      s.goal.reset();
      s.consecutive_detections = 0;
      s.reason = "target-lost";
      search_command();
      return {s, cmd};
    }
    if (in.estimate) {
      try {
        Pose g = extinguish_goal(*in.estimate, params.standoff, params.height_offset);
        g.translation = detail::clip_to(params, g.translation);
        s.goal = g;
      } catch (const DegenerateInput&) {
        // keep the previous goal
      }
    }
    if (!s.goal) {
      search_command();
      return {s, cmd};
    }
    // Continuous re-aim: face the target from the current position.
    double yaw = s.goal->yaw();
    if (in.estimate) {
      const Vec3 d = in.estimate->position - in.localized.translation;
      if (Vec2(d.x(), d.y()).norm() > 1e-6) yaw = std::atan2(d.y(), d.x());
    }
    cmd.motion = detail::goto_cmd(params, s.goal->translation, yaw);
    const bool was_on = s.pump_on;
    s.pump_on = s.water > 0.0 &&
                pump_logic(*s.goal, in.localized, params.pos_tol, params.yaw_tol, s.pump_on, params.rearm_fraction);
    if (s.pump_on) {
      cmd.volume = pumped_volume(s.water, params.flow_rate, dt);
      s.water -= cmd.volume;
      if (!was_on) s.reason = "pump-on";
      cmd.pump = true;
    } else if (was_on) {
      s.reason = "pump-off";
    }
    if (s.water <= 0.0) {
      s.state = UavState::ReturnHome;
      s.pump_on = false;
      s.goal.reset();
      s.reason = "water-exhausted";
      cmd.motion = detail::goto_cmd(params, params.home, in.localized.yaw());
    }
    return {s, cmd};
  }

  // ReturnHome
  s.pump_on = false;
  cmd.motion = detail::goto_cmd(params, params.home, in.localized.yaw());
  return {s, cmd};
}

// ---------------------------------------------------------------------------
// UGV

enum class UgvState { Drive, ScanArm, Aim, SprayPhase1, SprayPhase2, NextFire, Done };

inline const char* to_string(UgvState s) {
  switch (s) {
    case UgvState::Drive: return "drive";
    case UgvState::ScanArm: return "scan-arm";
    case UgvState::Aim: return "aim";
    case UgvState::SprayPhase1: return "spray-phase1";
    case UgvState::SprayPhase2: return "spray-phase2";
    case UgvState::NextFire: return "next-fire";
    case UgvState::Done: return "done";
  }
  return "?";
}

struct ScanRect {
  double width = 0.6;
  double height = 0.4;
  double period = 12.0;
};

/// Wrist offset along the rectangle perimeter in the base y-z plane. Starts
/// at the bottom-left corner (+y, -z) and runs at constant speed.
inline Vec3 scan_motion(double t, const ScanRect& rect) {
  if (!(rect.period > 0.0)) throw DegenerateInput("scan_motion: period must be > 0");
  const double w = rect.width, h = rect.height;
  const double perim = 2.0 * (w + h);
  double phase = std::fmod(t / rect.period, 1.0);
  if (phase < 0.0) phase += 1.0;
  double s = phase * perim;
  const double left = 0.5 * w, bottom = -0.5 * h;
  if (s <= w) return {0.0, left - s, bottom};
  s -= w;
  if (s <= h) return {0.0, -left, bottom + s};
  s -= h;
  if (s <= w) return {0.0, -left + s, -bottom};
  s -= w;
  return {0.0, left, -bottom - s};
}

/// Hourglass tilt offsets in radians: yaw = A sin(2 pi t / T), pitch = A sin(4 pi t / T).
struct Tilt {
  double pitch = 0.0;
  double yaw = 0.0;
};

inline Tilt spray_pattern(double t, double amplitude, double period) {
  if (!(period > 0.0)) throw DegenerateInput("spray_pattern: period must be > 0");
  return {amplitude * std::sin(4.0 * kPi * t / period), amplitude * std::sin(2.0 * kPi * t / period)};
}

struct ArmModel {
  Vec3 shoulder = Vec3(0.2, 0.0, 0.5);  // arm base in the robot base frame
  double reach = 1.3;
  double min_z = 0.15;  // nozzle height bounds in the base frame
  double max_z = 1.6;
  double max_head = 1.5;      // highest target above the base the pump can reach
  double standoff = 0.9;      // horizontal nozzle-to-target distance
  double max_step = 0.10;     // per aim call
  double exit_speed = 4.0;
  double gravity = 9.81;
};

/// Nozzle pose (base frame) whose arc passes through `target` (base frame).
inline Pose aim_solution(const Vec3& target, const ArmModel& arm) {
  if (target.z() > arm.max_head) throw Unreachable("aim: target is above the pump head limit");
  const Vec2 horiz(target.x() - arm.shoulder.x(), target.y() - arm.shoulder.y());
  if (horiz.norm() < 1e-6) throw Unreachable("aim: target is above the arm base");
  const Vec2 u = horiz.normalized();
  const Vec3 nozzle(target.x() - arm.standoff * u.x(), target.y() - arm.standoff * u.y(),
                    std::clamp(target.z(), arm.min_z, arm.max_z));
  if ((nozzle - arm.shoulder).norm() > arm.reach) throw Unreachable("aim: nozzle pose outside the arm workspace");
  const auto elev = sim::launch_elevation(arm.standoff, target.z() - nozzle.z(), arm.exit_speed, arm.gravity);
  if (!elev) throw Unreachable("aim: no ballistic solution at this exit speed");
  return Pose::from_xyz_rpy(nozzle.x(), nozzle.y(), nozzle.z(), 0.0, -*elev, std::atan2(u.y(), u.x()));
}

/// Move toward the aim solution by at most `max_step` of translation; the
/// orientation is set to the solution directly.
inline Pose aim_step(const Vec3& target, const Pose& nozzle, const ArmModel& arm) {
  const Pose sol = aim_solution(target, arm);
  const Vec3 d = sol.translation - nozzle.translation;
  const double n = d.norm();
  Pose out = sol;
  if (n > arm.max_step) out.translation = nozzle.translation + d * (arm.max_step / n);
  return out;
}

struct FireSlot {
  std::string id;
  std::vector<Waypoint> approach;  // ends at the scan pose
  Pose scan_arm;                   // nozzle pose at the rectangle center (base frame)
  ScanRect rect;
};

struct UgvParams {
  std::vector<FireSlot> slots;  // exactly two, visited in order
  ArmModel arm;
  double water_per_fire = 4.0;
  double flow_rate = 0.1;
  double arrival_tolerance = 0.1;
  double arrival_yaw_tolerance = deg2rad(5.0);
  double aligned_translation = 0.03;
  double aligned_rotation = deg2rad(2.0);
  double spray_amplitude = deg2rad(3.0);
  double spray_period = 4.0;
};

struct UgvFsm {
  UgvState state = UgvState::Drive;
  std::size_t slot = 0;
  std::size_t waypoint = 0;
  double state_start = 0.0;
  double water = 0.0;           // liters remaining
  double used_this_fire = 0.0;  // liters
  std::optional<Pose> aim_pose;  // base frame, locked at SprayPhase1 entry
  std::optional<Pose> arm_target;  // pending aim increment, base frame
  bool pump_on = false;
  std::string reason;
};

struct UgvInputs {
  Pose localized;                  // base in the field frame
  std::optional<Vec3> heat;        // fresh heat-source estimate, field frame
  Pose arm_pose;                   // nozzle in the base frame
  double now = 0.0;
};

struct UgvCommand {
  sim::MotionCommand base = sim::HoverCommand{};
  std::optional<Pose> arm;
  bool pump = false;
  double volume = 0.0;  // liters pumped this step
};

inline std::pair<UgvFsm, UgvCommand> ugv_step(const UgvFsm& fsm, const UgvInputs& in, const UgvParams& params,
                                               double dt) {
  if (!(dt > 0.0)) throw DegenerateInput("ugv_step: dt must be > 0");
  UgvFsm s = fsm;
  UgvCommand cmd;
  s.reason.clear();
  s.pump_on = false;

  auto enter = [&](UgvState st, const char* why) {
    s.state = st;
    s.state_start = in.now;
    s.reason = why;
  };
  auto next_fire = [&](const char* why) {
    ++s.slot;
    s.waypoint = 0;
    s.used_this_fire = 0.0;
    s.aim_pose.reset();
    s.arm_target.reset();
    enter(s.slot >= params.slots.size() ? UgvState::Done : UgvState::Drive, why);
  };

  if (s.state == UgvState::Done || s.slot >= params.slots.size()) {
    s.state = UgvState::Done;
    return {s, cmd};
  }
  const FireSlot& slot = params.slots[s.slot];
  if (s.state == UgvState::ScanArm && in.heat) enter(UgvState::Aim, "heat-found");

  switch (s.state) {
    case UgvState::Drive: {
      if (slot.approach.empty()) {
        enter(UgvState::ScanArm, "at-slot");
        break;
      }
      const Waypoint& wp = slot.approach[std::min(s.waypoint, slot.approach.size() - 1)];
      const bool last = s.waypoint + 1 >= slot.approach.size();
      const bool arrived =
          translation_distance(in.localized, wp.pose) <= params.arrival_tolerance &&
          (!last || std::abs(wrap_angle(in.localized.yaw() - wp.pose.yaw())) <= params.arrival_yaw_tolerance);
      if (arrived) {
        if (last) {
          enter(UgvState::ScanArm, "at-slot");
          cmd.arm = slot.scan_arm;
          return {s, cmd};
        }
        ++s.waypoint;
      }
      const Waypoint& target = slot.approach[std::min(s.waypoint, slot.approach.size() - 1)];
      cmd.base = sim::WaypointCommand{target.pose.translation, target.pose.yaw()};
      break;
    }
    case UgvState::ScanArm: {
      if (in.now - s.state_start >= slot.rect.period) {
        next_fire("no-heat");
        break;
      }
      Pose target = slot.scan_arm;
      target.translation += scan_motion(in.now - s.state_start, slot.rect);
      cmd.arm = target;
      break;
    }
    case UgvState::Aim: {
      if (s.arm_target && (translation_distance(*s.arm_target, in.arm_pose) > 1e-3 ||
                           rotation_distance(*s.arm_target, in.arm_pose) > deg2rad(0.1))) {
        cmd.arm = s.arm_target;  // let the previous increment finish
        break;
      }
      s.arm_target.reset();
      if (!in.heat) {
        cmd.arm = in.arm_pose;  // hold until a fresh estimate arrives
        break;
      }
      const Vec3 target = in.localized.inverse() * *in.heat;
      try {
        const Pose sol = aim_solution(target, params.arm);
        if (translation_distance(sol, in.arm_pose) <= params.aligned_translation &&
            rotation_distance(sol, in.arm_pose) <= params.aligned_rotation) {
          s.aim_pose = in.arm_pose;
          enter(UgvState::SprayPhase1, "aligned");
          cmd.arm = in.arm_pose;
          break;
        }
        cmd.arm = aim_step(target, in.arm_pose, params.arm);
        s.arm_target = cmd.arm;
      } catch (const Unreachable&) {
        next_fire("unreachable");
      }
      break;
    }
    case UgvState::SprayPhase1:
    case UgvState::SprayPhase2: {
      const bool phase1 = s.state == UgvState::SprayPhase1;
      const double limit = phase1 ? 0.5 * params.water_per_fire : params.water_per_fire;
      Pose arm = s.aim_pose.value_or(in.arm_pose);
      if (!phase1) {
        const Tilt tilt = spray_pattern(in.now - s.state_start, params.spray_amplitude, params.spray_period);
        arm.rotation = (arm.rotation * Quat(Eigen::AngleAxisd(tilt.yaw, Vec3::UnitZ())) *
                        Quat(Eigen::AngleAxisd(tilt.pitch, Vec3::UnitY())))
                           .normalized();
      }
      cmd.arm = arm;
      if (s.used_this_fire >= limit - 1e-12 || s.water <= 0.0) {
        if (phase1 && s.water > 0.0) {
          enter(UgvState::SprayPhase2, "phase1-complete");
        } else {
          next_fire("spray-complete");
        }
        break;
      }
      const double v = pumped_volume(s.water, params.flow_rate, dt);
      s.water -= v;
      s.used_this_fire += v;
      cmd.volume = v;
      s.pump_on = true;
      cmd.pump = true;
      break;
    }
    case UgvState::NextFire:
      next_fire("next-fire");
      break;
    case UgvState::Done:
      break;
  }
  return {s, cmd};
}

}  // namespace emberpipe::autonomy
