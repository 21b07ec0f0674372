#pragma once

// Scan-to-map registration (point-to-plane ICP) and the drift-offset
// bookkeeping that turns an ego-motion estimate into a map-frame pose.

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "emberpipe/arena.hpp"
#include "emberpipe/cloud_io.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/kdtree.hpp"

namespace emberpipe::loc {

struct ReferenceMap {
  std::string name;
  Aabb activation;
  PointCloud cloud;  // field frame
  std::vector<Vec3> normals;
  KdTree tree;

  /// Normals from PCA over the k nearest neighbours of each point.
  static ReferenceMap build(PointCloud cloud, std::string name, Aabb activation, std::size_t k = 10) {
    if (cloud.empty()) throw DegenerateInput("reference map '" + name + "' is empty");
    ReferenceMap m;
    m.name = std::move(name);
    m.activation = activation;
    m.tree = KdTree(cloud.points);
    m.normals.reserve(cloud.size());
    std::vector<Vec3> nbrs;
    for (const auto& p : cloud.points) {
      nbrs.clear();
      for (const auto& nb : m.tree.knn(p, k)) nbrs.push_back(cloud.points[nb.index]);
      Vec3 n = Vec3::Zero();
      try {
        n = mean_and_normal(nbrs).normal;
      } catch (const DegenerateInput&) {
        n = Vec3::Zero();  // excluded from point-to-plane residuals
      }
      m.normals.push_back(n);
    }
    m.cloud = std::move(cloud);
    m.cloud.frame_id = "field";
    return m;
  }
};

/// Regular sampling of the LiDAR-visible arena surfaces (opaque walls and
/// the floor inside the bounds), skipping hole disks.
inline PointCloud sample_arena_surfaces(const sim::ArenaModel& arena, double spacing) {
  if (!(spacing > 0.0)) throw DegenerateInput("map spacing must be > 0");
  PointCloud cloud;
  cloud.frame_id = "field";
  sim::RayCaster caster(arena);
  for (std::size_t f = 0; f < arena.walls.size(); ++f) {
    const auto& w = arena.walls[f];
    if (w.material == sim::Material::Acrylic) continue;
    const int n1 = std::max(1, int(std::ceil(w.edge1.norm() / spacing)));
    const int n2 = std::max(1, int(std::ceil(w.edge2.norm() / spacing)));
    for (int i = 0; i <= n1; ++i)
      for (int j = 0; j <= n2; ++j) {
        const Vec3 p = w.corner + (double(i) / n1) * w.edge1 + (double(j) / n2) * w.edge2;
        if (caster.hole_at(f, p)) continue;
        cloud.points.push_back(p);
      }
  }
  const auto& b = arena.bounds;
  const int nx = std::max(1, int(std::ceil((b.max.x() - b.min.x()) / spacing)));
  const int ny = std::max(1, int(std::ceil((b.max.y() - b.min.y()) / spacing)));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      cloud.points.emplace_back(b.min.x() + (b.max.x() - b.min.x()) * i / nx,
                                b.min.y() + (b.max.y() - b.min.y()) * j / ny, arena.floor_z);
  return cloud;
}

/// Map sidecar header: "# name: <label>" and
/// "# activation: minx miny minz maxx maxy maxz".
inline ReferenceMap load_map(const std::string& path) {
  auto file = read_cloud(path);
  ReferenceMap proto;
  std::string name = file.header.count("name") ? file.header["name"] : "map";
  Aabb act{Vec3::Constant(-1e9), Vec3::Constant(1e9)};
  if (auto it = file.header.find("activation"); it != file.header.end()) {
    std::istringstream ss(it->second);
    double v[6];
    for (double& x : v)
      if (!(ss >> x)) throw ParseError("map: activation needs 6 numbers");
    act = Aabb{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
    if (!act.valid()) throw ParseError("map: activation min exceeds max");
  }
  return ReferenceMap::build(std::move(file.cloud), name, act);
}

inline void save_map(const std::string& path, const ReferenceMap& map) {
  std::ostringstream act;
  act.precision(9);
  act << map.activation.min.x() << ' ' << map.activation.min.y() << ' ' << map.activation.min.z() << ' '
      << map.activation.max.x() << ' ' << map.activation.max.y() << ' ' << map.activation.max.z();
  write_cloud(path, map.cloud, {{"activation", act.str()}, {"name", map.name}});
}

/// Centroid of the points in each occupied voxel, in first-seen voxel order.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) return cloud;
  std::map<std::tuple<long, long, long>, std::size_t> index;
  std::vector<Vec3> sums;
  std::vector<int> counts;
  for (const auto& p : cloud.points) {
    const auto key = std::make_tuple(long(std::floor(p.x() / voxel)), long(std::floor(p.y() / voxel)),
                                     long(std::floor(p.z() / voxel)));
    auto [it, inserted] = index.try_emplace(key, sums.size());
    if (inserted) {
      sums.push_back(Vec3::Zero());
      counts.push_back(0);
    }
    sums[it->second] += p;
    ++counts[it->second];
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.stamp = cloud.stamp;
  out.points.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out.points.push_back(sums[i] / counts[i]);
  return out;
}

struct RegistrationParams {
  int max_iterations = 20;
  double gate_start = 0.5;  // correspondence distance, annealed linearly
  double gate_end = 0.1;
  double voxel = 0.25;
  double min_inlier_fraction = 0.4;
  double max_rms = 0.15;
};

struct RegistrationResult {
  Pose pose;  // scan frame in the map frame
  double rms = 0.0;
  double inlier_fraction = 0.0;
  int iterations = 0;
};

/// Point-to-plane ICP from `initial`. Throws RegistrationFailure when the
/// final fit has too few inliers or too large an RMS residual.
inline RegistrationResult register_scan(const PointCloud& scan, const ReferenceMap& map, const Pose& initial,
                                        const RegistrationParams& params = {}) {
  if (scan.empty()) throw DegenerateInput("register_scan: empty scan");
  if (map.tree.empty()) throw DegenerateInput("register_scan: empty map");
  const PointCloud src = voxel_downsample(scan, params.voxel);
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  Mat3 R = initial.rotation_matrix();
  Vec3 t = initial.translation;
  RegistrationResult res;
  const int iters = std::max(1, params.max_iterations);
  for (int it = 0; it < iters; ++it) {
    const double a = iters > 1 ? double(it) / (iters - 1) : 1.0;
    const double gate = params.gate_start + a * (params.gate_end - params.gate_start);
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    int used = 0;
    for (const auto& p : src.points) {
      const Vec3 q = R * p + t;
      const auto nb = map.tree.nearest(q, gate);
      if (!nb) continue;
      const Vec3& n = map.normals[nb->index];
      if (n.squaredNorm() < 0.5) continue;
      const double r = n.dot(q - map.cloud.points[nb->index]);
      Vec6 J;
      J.head<3>() = q.cross(n);
      J.tail<3>() = n;
      H += J * J.transpose();
      g += J * r;
      ++used;
    }
    res.iterations = it + 1;
    if (used < 6) break;
    // Light damping keeps weakly observed directions in place.
    H.diagonal().array() += 1e-6 * (H.trace() / 6.0 + 1e-12);
    const Vec6 delta = -H.ldlt().solve(g);
    const Vec3 w = delta.head<3>();
    const double ang = w.norm();
    const Mat3 dR = ang > 0 ? Mat3(Eigen::AngleAxisd(ang, w / ang)) : Mat3::Identity();
    R = dR * R;
    t = dR * t + delta.tail<3>();
    if (delta.norm() < 1e-10 && it >= 1) break;
  }
  // Re-orthonormalize.
  Quat q(R);
  q.normalize();
  res.pose = Pose{t, q};

  int inliers = 0;
  double sq = 0.0;
  for (const auto& p : src.points) {
    const Vec3 x = res.pose * p;
    const auto nb = map.tree.nearest(x, params.gate_end);
    if (!nb) continue;
    const Vec3& n = map.normals[nb->index];
    const double r = n.squaredNorm() > 0.5 ? n.dot(x - map.cloud.points[nb->index]) : std::sqrt(nb->sq_dist);
    sq += r * r;
    ++inliers;
  }
  res.inlier_fraction = double(inliers) / double(src.size());
  res.rms = inliers ? std::sqrt(sq / inliers) : std::numeric_limits<double>::infinity();
  if (res.inlier_fraction < params.min_inlier_fraction || res.rms > params.max_rms) {
    std::ostringstream msg;
    msg << "registration failed: inlier_fraction " << res.inlier_fraction << ", rms " << res.rms;
    throw RegistrationFailure(msg.str());
  }
  return res;
}

struct OffsetBounds {
  double max_translation = 0.30;           // strict
  double max_rotation = deg2rad(5.0);      // inclusive
};

struct LocalizationState {
  std::optional<Pose> offset;  // field <- ego-estimate correction
  Pose last_localized_pose;
  double last_update_time = -std::numeric_limits<double>::infinity();
  std::string active_map;
  bool stale = false;  // last candidate was rejected
  int accepted = 0;
  int rejected = 0;

  bool initialized() const { return offset.has_value(); }
};

/// Accepts candidate = registered * inverse(ego) when it moves the offset by
/// less than the bounds; the first candidate is always accepted.
inline LocalizationState update_offset(const LocalizationState& state, const Pose& registered, const Pose& ego_estimate,
                                       double now = 0.0, const OffsetBounds& bounds = {}) {
  const Pose candidate = registered * ego_estimate.inverse();
  LocalizationState next = state;
  if (state.offset) {
    const bool ok = translation_distance(candidate, *state.offset) < bounds.max_translation &&
                    rotation_distance(candidate, *state.offset) <= bounds.max_rotation;
    if (!ok) {
      next.stale = true;
      ++next.rejected;
      return next;
    }
  }
  next.offset = candidate;
  next.stale = false;
  next.last_update_time = now;
  ++next.accepted;
  return next;
}

inline Pose localize(const LocalizationState& state, const Pose& ego_estimate) {
  if (!state.offset) throw NotInitialized("localize: no accepted offset yet");
  return *state.offset * ego_estimate;
}

inline bool detect_jump(const Pose& previous_localized, const Pose& new_localized, double threshold = 1.0) {
  return translation_distance(previous_localized, new_localized) > threshold;
}

/// Map priority is list order. A higher-priority map takes over once the
/// position is `hysteresis` inside its region; the current map is kept
/// while the position stays within `hysteresis` outside its region.
inline std::string select_map(const Vec3& position, const std::vector<ReferenceMap>& maps,
                              const std::optional<std::string>& current = std::nullopt, double hysteresis = 0.5) {
  std::optional<std::size_t> cur;
  if (current)
    for (std::size_t i = 0; i < maps.size(); ++i)
      if (maps[i].name == *current) cur = i;
  if (cur) {
    for (std::size_t i = 0; i < *cur; ++i)
      if (maps[i].activation.expanded(-hysteresis).contains(position)) return maps[i].name;
    if (maps[*cur].activation.expanded(hysteresis).contains(position)) return maps[*cur].name;
  }
  for (const auto& m : maps)
    if (m.activation.contains(position)) return m.name;
  throw NoMap("no reference map covers the position");
}

}  // namespace emberpipe::loc
