#pragma once

// Single-target fusion of thermal and hole detections: feasibility gating,
// 10-of-20 initialization, ball/normal gates, thermal/hole precedence
// windows, running-average estimate and timeout.

#include <algorithm>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "emberpipe/detection.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"

namespace emberpipe::filter {

enum class Phase { Initializing, Tracking };

inline const char* to_string(Phase p) { return p == Phase::Initializing ? "initializing" : "tracking"; }

namespace reason {
inline constexpr const char* kInfeasibleAngle = "infeasible-angle";
inline constexpr const char* kOutsideBall = "outside-ball";
inline constexpr const char* kNormalDisagrees = "normal-disagrees";
inline constexpr const char* kNoRecentHeat = "no-recent-heat";
inline constexpr const char* kHoleFarFromHeat = "hole-far-from-heat";
inline constexpr const char* kThermalSuppressedByHole = "thermal-suppressed-by-hole";
inline constexpr const char* kNotTracking = "not-tracking";
// Non-rejection outcomes.
inline constexpr const char* kBuffered = "buffered";
inline constexpr const char* kInitialized = "initialized";
inline constexpr const char* kAdmitted = "admitted";
}  // namespace reason

struct FilterParams {
  double max_view_angle = deg2rad(45.0);
  double ball_radius = 1.0;
  double max_normal_angle = deg2rad(45.0);
  std::size_t init_required = 10;
  std::size_t init_window = 20;
  double init_radius = 1.0;
  std::size_t history_size = 10;
  double precedence_window = 1.0;
  double timeout = 2.0;
};

struct TrackerState {
  std::deque<Detection> history;      // H, oldest first
  std::deque<Detection> init_buffer;  // feasible thermal detections, oldest first
  std::optional<Detection> latest_thermal;
  double latest_thermal_time = 0.0;
  std::optional<double> latest_hole_time;  // last admitted hole detection
  double last_added_time = 0.0;
  Phase phase = Phase::Initializing;
};

struct IngestResult {
  TrackerState state;
  bool admitted = false;  // entered H or the init buffer
  std::string reason;
};

struct Estimate {
  Vec3 position;
  Vec3 normal;
};

/// Angle between the detection normal and the line of sight to the robot is
/// at most max_view_angle.
inline bool feasible(const Detection& d, const Vec3& robot_position, const FilterParams& params = {}) {
  const Vec3 los = robot_position - d.position;
  if (!(los.squaredNorm() > 0.0)) return false;
  return angle_between(d.normal, los) <= params.max_view_angle;
}

inline Estimate estimate(const TrackerState& state) {
  if (state.phase != Phase::Tracking || state.history.empty())
    throw NotInitialized("target filter is not tracking");
  Vec3 p = Vec3::Zero(), n = Vec3::Zero();
  for (const auto& d : state.history) {
    p += d.position;
    n += d.normal;
  }
  p /= double(state.history.size());
  if (n.norm() < 1e-12) n = state.history.back().normal;
  return {p, n.normalized()};
}

namespace detail {

// Seeds the history when `required` buffered detections around some anchor
// lie within `radius` of their centroid. Anchors are tried newest first; the
// selected group is the anchor's nearest neighbours (ties: newer first).
inline std::optional<std::vector<std::size_t>> find_init_cluster(const std::deque<Detection>& buf,
                                                                 const FilterParams& params) {
  const std::size_t k = params.init_required;
  if (buf.size() < k || k == 0) return std::nullopt;
  std::vector<std::size_t> idx(buf.size());
  for (std::size_t a = buf.size(); a-- > 0;) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
      const double di = (buf[i].position - buf[a].position).squaredNorm();
      const double dj = (buf[j].position - buf[a].position).squaredNorm();
      return di != dj ? di < dj : i > j;
    });
    std::vector<std::size_t> group(idx.begin(), idx.begin() + long(k));
    Vec3 c = Vec3::Zero();
    for (auto i : group) c += buf[i].position;
    c /= double(k);
    const bool tight = std::all_of(group.begin(), group.end(), [&](std::size_t i) {
      return (buf[i].position - c).norm() <= params.init_radius;
    });
    if (tight) {
      std::sort(group.begin(), group.end());
      return group;
    }
  }
  return std::nullopt;
}

inline void push_history(TrackerState& s, const Detection& d, double now, const FilterParams& params) {
  s.history.push_back(d);
  while (s.history.size() > params.history_size) s.history.pop_front();
  s.last_added_time = now;
}

}  // namespace detail

/// One detection through the gates. `robot_position` is the robot at
/// detection time. Rejections leave H and the estimate untouched; thermal
/// detections always refresh latest_thermal.
inline IngestResult ingest(const TrackerState& state, const Detection& d, const Vec3& robot_position, double now,
                           const FilterParams& params = {}) {
  IngestResult out{state, false, {}};
  TrackerState& s = out.state;
  const bool thermal = d.kind == DetectionKind::Thermal;
  auto reject = [&](const char* why) {
    out.reason = why;
    return out;
  };
  if (thermal) {
    s.latest_thermal = d;
    s.latest_thermal_time = now;
  }

  if (s.phase == Phase::Initializing) {
    if (!thermal) return reject(reason::kNotTracking);
    if (!feasible(d, robot_position, params)) return reject(reason::kInfeasibleAngle);
    s.init_buffer.push_back(d);
    while (s.init_buffer.size() > params.init_window) s.init_buffer.pop_front();
    out.admitted = true;
    out.reason = reason::kBuffered;
    if (auto group = detail::find_init_cluster(s.init_buffer, params)) {
      s.history.clear();
      for (auto i : *group) s.history.push_back(s.init_buffer[i]);
      while (s.history.size() > params.history_size) s.history.pop_front();
      s.init_buffer.clear();
      s.phase = Phase::Tracking;
      s.last_added_time = now;
      out.reason = reason::kInitialized;
    }
    return out;
  }

  if (!feasible(d, robot_position, params)) return reject(reason::kInfeasibleAngle);
  const Estimate est = estimate(s);
  if ((d.position - est.position).norm() > params.ball_radius) return reject(reason::kOutsideBall);
  if (angle_between(d.normal, est.normal) > params.max_normal_angle) return reject(reason::kNormalDisagrees);

  if (thermal) {
    if (s.latest_hole_time && now - *s.latest_hole_time <= params.precedence_window)
      return reject(reason::kThermalSuppressedByHole);
  } else {
    if (!state.latest_thermal || now - state.latest_thermal_time > params.precedence_window)
      return reject(reason::kNoRecentHeat);
    if ((d.position - state.latest_thermal->position).norm() > params.ball_radius)
      return reject(reason::kHoleFarFromHeat);
    s.latest_hole_time = now;
  }
  detail::push_history(s, d, now, params);
  out.admitted = true;
  out.reason = reason::kAdmitted;
  return out;
}

/// Re-initializes when tracking and nothing was added for more than `timeout`.
inline TrackerState check_timeout(const TrackerState& state, double now, const FilterParams& params = {}) {
  if (state.phase != Phase::Tracking || !(now - state.last_added_time > params.timeout)) return state;
  TrackerState s = state;
  s.phase = Phase::Initializing;
  s.history.clear();
  s.init_buffer.clear();
  return s;
}

}  // namespace emberpipe::filter
