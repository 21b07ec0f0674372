#pragma once

// GNSS ego-motion estimate with a bounded Gaussian random-walk drift.

#include <cmath>

#include "emberpipe/geometry.hpp"
#include "emberpipe/rng.hpp"

namespace emberpipe::sim {

struct GnssParams {
  double sigma = 0.05;               // total drift rate, m / sqrt(s), split evenly over x, y, z
  double near_building_factor = 5.0;
  double bound = 10.0;               // drift magnitude is clamped to this
};

struct DriftState {
  Vec3 offset = Vec3::Zero();
};

/// Advance the drift by dt and return the drifted pose. Drift is applied in
/// the world frame: measured = Translation(offset) * true_pose.
inline Pose gnss_measure(const Pose& true_pose, DriftState& drift, const GnssParams& params, double dt, Rng& rng,
                         bool near_building) {
  const double sigma = params.sigma * (near_building ? params.near_building_factor : 1.0);
  if (sigma > 0.0 && dt > 0.0) {
    const double s = sigma * std::sqrt(dt / 3.0);
    drift.offset += Vec3(rng.normal(0.0, s), rng.normal(0.0, s), rng.normal(0.0, s));
    const double mag = drift.offset.norm();
    if (mag > params.bound) drift.offset *= params.bound / mag;
  }
  Pose measured = true_pose;
  measured.translation += drift.offset;
  return measured;
}

/// Inject a step discontinuity (used to exercise jump safety).
inline void inject_step(DriftState& drift, const Vec3& step) { drift.offset += step; }

}  // namespace emberpipe::sim
