#pragma once

// Water jet as a ballistic particle arc: x(t) = p0 + v0 t + 1/2 g t^2.

#include <cmath>
#include <optional>

#include "emberpipe/arena.hpp"
#include "emberpipe/geometry.hpp"

namespace emberpipe::sim {

struct JetModel {
  double exit_speed = 5.0;   // m/s along the nozzle x axis
  Pose exit_pose;            // nozzle in the arena frame
  double flow_rate = 0.1;    // liters per second
  double gravity = 9.81;

  void validate() const {
    if (!(exit_speed > 0.0)) throw DegenerateInput("jet: exit_speed must be > 0");
    if (!(flow_rate > 0.0)) throw DegenerateInput("jet: flow_rate must be > 0");
  }

  Vec3 position_at(double t) const {
    return exit_pose.translation + exit_speed * t * exit_pose.forward() + Vec3(0, 0, -0.5 * gravity * t * t);
  }
};

struct JetResult {
  Vec3 hit_point = Vec3::Zero();
  std::optional<std::size_t> hole_hit;
  double water_delivered = 0.0;
  double time_of_flight = 0.0;
  bool hit_surface = false;
};

namespace detail {

// Smallest root > eps of a t^2 + b t + c = 0, or all roots sorted when wanted.
inline int quadratic_roots(double a, double b, double c, double out[2]) {
  if (std::abs(a) < 1e-14) {
    if (std::abs(b) < 1e-14) return 0;
    out[0] = -c / b;
    return 1;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return 0;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
  double r0 = q / a;
  double r1 = std::abs(q) > 1e-300 ? c / q : r0;
  if (r0 > r1) std::swap(r0, r1);
  out[0] = r0;
  out[1] = r1;
  return 2;
}

}  // namespace detail

/// Trace the arc to its first surface. Water is credited to a hole only when
/// the arc crosses that hole's disk; the amount is flow_rate * duration.
inline JetResult simulate_jet(const JetModel& jet, const ArenaModel& arena, double duration, double t_max = 10.0) {
  jet.validate();
  if (duration < 0.0) throw DegenerateInput("simulate_jet: duration must be >= 0");
  const Vec3 p0 = jet.exit_pose.translation;
  const Vec3 v0 = jet.exit_speed * jet.exit_pose.forward();
  const Vec3 g(0, 0, -jet.gravity);
  RayCaster caster(arena);

  double best_t = t_max;
  std::optional<std::size_t> best_facet;
  bool floor_hit = false;

  for (std::size_t f = 0; f < arena.walls.size(); ++f) {
    const auto& w = arena.walls[f];
    const Vec3 n = w.normal();
    double roots[2];
    const int k = detail::quadratic_roots(0.5 * n.dot(g), n.dot(v0), n.dot(p0 - w.corner), roots);
    for (int i = 0; i < k; ++i) {
      const double t = roots[i];
      if (!(t > 1e-9) || t >= best_t) continue;
      const Vec3 p = p0 + v0 * t + 0.5 * g * t * t;
      if (w.contains_on_plane(p)) {
        best_t = t;
        best_facet = f;
        floor_hit = false;
        break;
      }
    }
  }
  {
    double roots[2];
    const int k = detail::quadratic_roots(-0.5 * jet.gravity, v0.z(), p0.z() - arena.floor_z, roots);
    for (int i = 0; i < k; ++i) {
      const double t = roots[i];
      if (t > 1e-9 && t < best_t) {
        const Vec3 p = p0 + v0 * t + 0.5 * g * t * t;
        if (caster.inside_bounds_xy(p)) {
          best_t = t;
          best_facet.reset();
          floor_hit = true;
        }
        break;
      }
    }
  }

  JetResult res;
  res.time_of_flight = best_t;
  res.hit_point = p0 + v0 * best_t + 0.5 * g * best_t * best_t;
  res.hit_surface = best_facet.has_value() || floor_hit;
  if (best_facet) {
    if (auto h = caster.hole_at(*best_facet, res.hit_point)) {
      res.hole_hit = *h;
      res.water_delivered = jet.flow_rate * duration;
    }
  }
  return res;
}

/// Lower launch elevation (radians, positive up) whose arc from the origin
/// reaches horizontal distance `horizontal` at height `rise` (target - nozzle).
inline std::optional<double> launch_elevation(double horizontal, double rise, double speed, double gravity) {
  if (!(horizontal > 0.0) || !(speed > 0.0)) return std::nullopt;
  const double v2 = speed * speed;
  const double disc = v2 * v2 - gravity * (gravity * horizontal * horizontal + 2.0 * rise * v2);
  if (disc < 0.0) return std::nullopt;
  return std::atan((v2 - std::sqrt(disc)) / (gravity * horizontal));
}

/// Exit speed for a level shot that drops `drop` meters over `horizontal` meters.
inline double level_shot_speed(double horizontal, double drop, double gravity = 9.81) {
  return horizontal * std::sqrt(gravity / (2.0 * drop));
}

}  // namespace emberpipe::sim
