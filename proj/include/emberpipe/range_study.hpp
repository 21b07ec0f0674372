#pragma once

// Controlled comparison of the two heat-source range estimators: a heated
// element behind a hole in a flat test wall, observed head-on from a sweep of
// distances by a LiDAR + thermal rig.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emberpipe/arena.hpp"
#include "emberpipe/rng.hpp"
#include "emberpipe/sensors.hpp"
#include "emberpipe/thermal.hpp"

namespace emberpipe::study {

struct RangeStudyParams {
  double range_min = 0.5;
  double range_max = 5.0;
  double range_step = 0.25;
  int seeds = 20;
  std::uint64_t base_seed = 7;
  double hole_diameter = 0.15;
  double recess_depth = 0.10;
  double jitter = 0.05;  // lateral and vertical rig offset, uniform +-jitter
  double heat_threshold = 450.0;
  sim::LidarConfig lidar{};
  PinholeCamera camera{};
  Pose camera_in_lidar = optical_frame(Pose::from_translation(Vec3(0.0, 0.0, -0.08)));
};

struct RangeSample {
  double range = 0.0;   // nominal bin
  double truth = 0.0;   // camera depth of the wall plane
  std::optional<double> bbox;   // estimates, depth along the optical axis
  std::optional<double> lidar;
};

/// The element of known size is the heated plate, seen `recess_depth` behind
/// the wall, so the bbox calibration removes that offset.
inline thermal::BboxCalibration recess_calibration(double recess_depth) {
  return thermal::BboxCalibration({{0.0, -recess_depth}, {100.0, 100.0 - recess_depth}});
}

inline std::vector<RangeSample> run_range_study(const RangeStudyParams& p) {
  const double wall_x = 0.0;
  sim::ArenaModel arena;
  sim::Facet wall;
  wall.id = "test_wall";
  wall.corner = Vec3(wall_x, 3.0, 0.0);
  wall.edge1 = Vec3(0, 0, 4.0);
  wall.edge2 = Vec3(0, -6.0, 0);  // normal +x, facing the rig
  arena.walls.push_back(wall);
  sim::Hole hole;
  hole.id = "element";
  hole.center = Vec3(wall_x, 0.0, 1.5);
  hole.normal = Vec3(1, 0, 0);
  hole.diameter = p.hole_diameter;
  hole.recess_depth = p.recess_depth;
  hole.heated = true;
  arena.holes.push_back(hole);
  arena.bounds = Aabb{Vec3(-10, -10, 0), Vec3(10, 10, 5)};
  arena.validate();

  const auto calib = recess_calibration(p.recess_depth);
  const thermal::Extrinsics extr{p.camera_in_lidar};
  const int bins = int(std::lround((p.range_max - p.range_min) / p.range_step)) + 1;
  std::vector<RangeSample> out;
  for (int b = 0; b < bins; ++b) {
    const double range = p.range_min + b * p.range_step;
    for (int s = 0; s < p.seeds; ++s) {
      Rng rng(mix_seed(p.base_seed, std::uint64_t(b) * 1000 + s));
      const double dy = rng.uniform(-p.jitter, p.jitter);
      const double dz = rng.uniform(-p.jitter, p.jitter);
      // Rig faces -x; the camera sits at `range` from the wall.
      const Pose body = Pose::from_position_yaw(Vec3(wall_x + range, dy, 1.5 + dz), kPi);
      const Pose lidar_pose = Pose::from_translation(-p.camera_in_lidar.translation);
      const Pose lidar_world = body * lidar_pose;
      const Pose cam_world = lidar_world * p.camera_in_lidar;

      RangeSample sample;
      sample.range = range;
      const Vec3 axis = cam_world.rotation * Vec3::UnitZ();
      sample.truth = (wall_x - cam_world.translation.x()) / axis.x();

      const auto image = sim::render_thermal(arena, cam_world, p.camera, rng.next(), 2.0);
      const auto contours = thermal::detect_heat(image, p.heat_threshold, 1e9, 1);
      if (contours.empty()) {
        out.push_back(sample);
        continue;
      }
      const auto* best = &contours.front();
      for (const auto& c : contours)
        if (c.area > best->area) best = &c;
      try {
        sample.bbox = thermal::estimate_distance_bbox(*best, p.camera, p.hole_diameter, calib).distance;
      } catch (const Error&) {
      }
      const auto cloud = sim::render_lidar(arena, lidar_world, p.lidar, rng.next());
      try {
        const auto det = thermal::localize_heat_lidar(*best, cloud, extr, p.camera, Pose::identity());
        sample.lidar = (p.camera_in_lidar.inverse() * det.position).z();
      } catch (const Error&) {
      }
      out.push_back(sample);
    }
  }
  return out;
}

struct RangeBin {
  double range = 0.0;
  int samples = 0;
  int bbox_valid = 0;
  int lidar_valid = 0;
  double bbox_mean_error = 0.0;
  double lidar_mean_error = 0.0;
  double bbox_median_estimate = 0.0;
};

/// Mean absolute error per range bin. Missing estimates are skipped.
inline std::vector<RangeBin> summarize(const std::vector<RangeSample>& samples) {
  std::vector<RangeBin> bins;
  std::vector<std::vector<double>> bbox_estimates;
  for (const auto& s : samples) {
    if (bins.empty() || std::abs(bins.back().range - s.range) > 1e-9) {
      bins.push_back({});
      bins.back().range = s.range;
      bbox_estimates.emplace_back();
    }
    auto& b = bins.back();
    ++b.samples;
    if (s.bbox) {
      ++b.bbox_valid;
      b.bbox_mean_error += std::abs(*s.bbox - s.truth);
      bbox_estimates.back().push_back(*s.bbox);
    }
    if (s.lidar) {
      ++b.lidar_valid;
      b.lidar_mean_error += std::abs(*s.lidar - s.truth);
    }
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    auto& b = bins[i];
    if (b.bbox_valid) b.bbox_mean_error /= b.bbox_valid;
    if (b.lidar_valid) b.lidar_mean_error /= b.lidar_valid;
    auto& e = bbox_estimates[i];
    if (!e.empty()) {
      std::sort(e.begin(), e.end());
      b.bbox_median_estimate = e[(e.size() - 1) / 2];
    }
  }
  return bins;
}

inline std::string to_csv(const std::vector<RangeBin>& bins) {
  std::string out = "range,samples,bbox_valid,lidar_valid,bbox_mean_error,lidar_mean_error,bbox_median_estimate\n";
  char buf[256];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.2f,%d,%d,%d,%.4f,%.4f,%.4f\n", b.range, b.samples, b.bbox_valid,
                  b.lidar_valid, b.bbox_mean_error, b.lidar_mean_error, b.bbox_median_estimate);
    out += buf;
  }
  return out;
}

}  // namespace emberpipe::study
