#pragma once

// First-order robot kinematics with per-axis speed and acceleration caps.

#include <cmath>
#include <limits>
#include <optional>
#include <variant>

#include "emberpipe/geometry.hpp"

namespace emberpipe::sim {

enum class RobotKind { Uav, Ugv };

inline const char* to_string(RobotKind k) { return k == RobotKind::Uav ? "uav" : "ugv"; }

struct MotionLimits {
  static constexpr double kOff = std::numeric_limits<double>::infinity();
  Vec3 max_speed = Vec3::Constant(kOff);  // per world axis, m/s
  double max_accel = kOff;                // per axis, m/s^2
  double max_yaw_rate = kOff;             // rad/s
  double position_gain = 1.5;             // 1/s, waypoint tracking
  double yaw_gain = 2.0;                  // 1/s
  double arm_speed = 0.3;                 // m/s, nozzle translation
  double arm_rate = deg2rad(90.0);        // rad/s, nozzle rotation
};

struct RobotState {
  Pose true_pose;
  Vec3 velocity = Vec3::Zero();
  double yaw_rate = 0.0;
  RobotKind kind = RobotKind::Uav;
  double water_remaining = 0.0;
  bool pump_on = false;
  Pose arm_pose;  // nozzle in the base frame (UGV only)
};

/// World-frame linear velocity and yaw rate.
struct VelocityCommand {
  Vec3 linear = Vec3::Zero();
  double yaw_rate = 0.0;
};

/// Go to a world position and heading.
struct WaypointCommand {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

/// Bring velocity to zero and hold.
struct HoverCommand {};

using MotionCommand = std::variant<VelocityCommand, WaypointCommand, HoverCommand>;

struct StepCommand {
  MotionCommand motion = HoverCommand{};
  std::optional<Pose> arm_target;
};

namespace detail {

inline double clamp_abs(double v, double limit) { return std::isinf(limit) ? v : std::clamp(v, -limit, limit); }

inline Pose move_toward(const Pose& from, const Pose& to, double max_trans, double max_rot) {
  Pose out = from;
  const Vec3 d = to.translation - from.translation;
  const double n = d.norm();
  out.translation = n <= max_trans ? to.translation : Vec3(from.translation + d * (max_trans / n));
  const double ang = from.rotation.angularDistance(to.rotation);
  out.rotation = ang <= max_rot ? to.rotation : from.rotation.slerp(max_rot / ang, to.rotation);
  out.rotation.normalize();
  return out;
}

}  // namespace detail

/// Advance one step of length dt (> 0).
inline RobotState step_dynamics(const RobotState& state, const StepCommand& cmd, const MotionLimits& limits,
                                double dt) {
  if (!(dt > 0.0)) throw DegenerateInput("step_dynamics: dt must be > 0");
  RobotState next = state;
  const Vec3 pos = state.true_pose.translation;
  const double yaw = state.true_pose.yaw();

  Vec3 v_des = Vec3::Zero();
  double yaw_rate_des = 0.0;
  if (const auto* v = std::get_if<VelocityCommand>(&cmd.motion)) {
    v_des = v->linear;
    yaw_rate_des = v->yaw_rate;
  } else if (const auto* w = std::get_if<WaypointCommand>(&cmd.motion)) {
    v_des = limits.position_gain * (w->position - pos);
    yaw_rate_des = limits.yaw_gain * wrap_angle(w->yaw - yaw);
  }
  for (int i = 0; i < 3; ++i) v_des(i) = detail::clamp_abs(v_des(i), limits.max_speed(i));
  yaw_rate_des = detail::clamp_abs(yaw_rate_des, limits.max_yaw_rate);

  Vec3 v = state.velocity;
  for (int i = 0; i < 3; ++i) {
    const double dv = v_des(i) - v(i);
    v(i) += std::isinf(limits.max_accel) ? dv : std::clamp(dv, -limits.max_accel * dt, limits.max_accel * dt);
  }
  // Waypoint commands never overshoot along an axis within a step.
  if (const auto* w = std::get_if<WaypointCommand>(&cmd.motion)) {
    for (int i = 0; i < 3; ++i) {
      const double rem = w->position(i) - pos(i);
      if (v(i) * rem > 0.0 && std::abs(v(i)) * dt > std::abs(rem)) v(i) = rem / dt;
    }
  }
  double yr = yaw_rate_des;

  if (state.kind == RobotKind::Ugv) v.z() = 0.0;

  next.velocity = v;
  next.yaw_rate = yr;
  next.true_pose.translation = pos + v * dt;
  if (state.kind == RobotKind::Ugv) {
    next.true_pose.translation.z() = pos.z();
    next.true_pose = Pose::from_position_yaw(next.true_pose.translation, wrap_angle(yaw + yr * dt));
  } else {
    next.true_pose.rotation = (Quat(Eigen::AngleAxisd(yr * dt, Vec3::UnitZ())) * state.true_pose.rotation).normalized();
  }

  if (cmd.arm_target)
    next.arm_pose = detail::move_toward(state.arm_pose, *cmd.arm_target, limits.arm_speed * dt, limits.arm_rate * dt);
  return next;
}

}  // namespace emberpipe::sim
