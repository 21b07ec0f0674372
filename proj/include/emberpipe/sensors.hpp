#pragma once

// LiDAR and thermal camera renderers over an ArenaModel.

#include <cmath>
#include <cstdint>

#include "emberpipe/arena.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/rng.hpp"
#include "emberpipe/thermal_image.hpp"

namespace emberpipe::sim {

struct LidarConfig {
  int rings = 64;
  int horizontal_steps = 1024;
  double vfov_min = deg2rad(-16.6);
  double vfov_max = deg2rad(16.6);
  double max_range = 40.0;
  double min_range = 0.0;
  double range_noise = 0.01;
  Pose mount;  // lidar frame in the robot body frame
  double wall_intensity = 100.0;
  double plate_intensity = 60.0;

  void validate() const {
    if (rings < 1 || horizontal_steps < 1) throw DegenerateInput("lidar: rings and steps must be >= 1");
    if (range_noise < 0.0) throw DegenerateInput("lidar: range noise must be >= 0");
    if (!(max_range > min_range)) throw DegenerateInput("lidar: max_range must exceed min_range");
  }

  double elevation(int ring) const {
    return rings == 1 ? 0.5 * (vfov_min + vfov_max)
                      : vfov_min + (vfov_max - vfov_min) * ring / double(rings - 1);
  }
  double azimuth(int step) const { return -kPi + 2.0 * kPi * step / double(horizontal_steps); }
};

/// One return per (ring, step) ray: first surface hit, range perturbed by
/// Gaussian noise. Points are expressed in the lidar frame; `sensor_pose` is
/// the lidar frame in the arena frame.
inline PointCloud render_lidar(const ArenaModel& arena, const Pose& sensor_pose, const LidarConfig& config,
                               std::uint64_t rng_seed) {
  config.validate();
  RayCaster caster(arena);
  Rng rng(rng_seed);
  PointCloud cloud;
  cloud.frame_id = "lidar";
  cloud.points.reserve(std::size_t(config.rings) * config.horizontal_steps / 2);
  const Mat3 rot = sensor_pose.rotation_matrix();
  std::vector<double> cos_az(config.horizontal_steps), sin_az(config.horizontal_steps);
  for (int s = 0; s < config.horizontal_steps; ++s) {
    cos_az[s] = std::cos(config.azimuth(s));
    sin_az[s] = std::sin(config.azimuth(s));
  }
  for (int r = 0; r < config.rings; ++r) {
    const double el = config.elevation(r);
    const double ce = std::cos(el), se = std::sin(el);
    for (int s = 0; s < config.horizontal_steps; ++s) {
      const Vec3 dir_local(ce * cos_az[s], ce * sin_az[s], se);
      const Ray ray{sensor_pose.translation, rot * dir_local};
      const RayHit hit = caster.cast_lidar(ray, config.max_range + 5.0 * config.range_noise + 1.0);
      // One noise draw per ray keeps the stream aligned regardless of hits.
      const double noise = config.range_noise > 0.0 ? rng.normal(0.0, config.range_noise) : 0.0;
      if (!hit.hit()) continue;
      const double range = hit.t + noise;
      if (range > config.max_range || range < config.min_range || range <= 0.0) continue;
      cloud.points.push_back(dir_local * range);
      cloud.intensity.push_back(hit.kind == SurfaceKind::Plate ? config.plate_intensity : config.wall_intensity);
    }
  }
  return cloud;
}

struct ThermalConfig {
  PinholeCamera camera;
  Pose mount;  // camera housing (x forward) in the robot body frame
  double noise = 2.0;
};

/// Thermal frame from an optical-frame camera pose. Heated plates read
/// heat_temp scaled by acrylic transmission; everything else reads ambient.
inline ThermalImage render_thermal(const ArenaModel& arena, const Pose& camera_pose, const PinholeCamera& camera,
                                   std::uint64_t rng_seed, double noise = 2.0) {
  camera.validate();
  RayCaster caster(arena);
  Rng rng(rng_seed);
  ThermalImage img(camera.width, camera.height, arena.ambient_temp);
  const Mat3 rot = camera_pose.rotation_matrix();
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Vec3 d_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
      const Ray ray{camera_pose.translation, (rot * d_cam).normalized()};
      const auto sample = caster.cast_thermal(ray, 1e3);
      double value = arena.ambient_temp;
      if (sample.hit.kind == SurfaceKind::Plate) {
        const auto& hole = arena.holes[sample.hit.index];
        if (hole.heated) value += (hole.heat_temp - arena.ambient_temp) * sample.transmission;
      }
      if (noise > 0.0) value += rng.normal(0.0, noise);
      img.at(u, v) = value;
    }
  }
  return img;
}

}  // namespace emberpipe::sim
