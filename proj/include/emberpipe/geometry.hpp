#pragma once

// Frames, poses, pinhole projection, covariance statistics.
//
// Conventions:
//  - body / sensor frames: x forward, y left, z up
//  - camera optical frame: z along the optical axis, x right, y down
//  - angles are radians everywhere; degrees appear only at parse time

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emberpipe/errors.hpp"

namespace emberpipe {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/// Unsigned angle between two non-zero vectors, numerically stable near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Rigid transform. Applying it to x gives rotation * x + translation.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  static Pose identity() { return {}; }

  static Pose from_translation(const Vec3& t) { return {t, Quat::Identity()}; }

  /// Intrinsic Z-Y-X (yaw, pitch, roll) Euler angles.
  static Pose from_xyz_rpy(double x, double y, double z, double roll, double pitch, double yaw) {
    Quat q = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
             Eigen::AngleAxisd(roll, Vec3::UnitX());
    return {Vec3(x, y, z), q.normalized()};
  }

  static Pose from_position_yaw(const Vec3& p, double yaw) {
    return {p, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))};
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  Pose operator*(const Pose& b) const {
    return {rotation * b.translation + translation, (rotation * b.rotation).normalized()};
  }

  Pose inverse() const {
    const Quat qi = rotation.conjugate();
    return {-(qi * translation), qi};
  }

  double yaw() const {
    const Mat3 r = rotation_matrix();
    return std::atan2(r(1, 0), r(0, 0));
  }

  double pitch() const {
    const Mat3 r = rotation_matrix();
    return std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  }

  double roll() const {
    const Mat3 r = rotation_matrix();
    return std::atan2(r(2, 1), r(2, 2));
  }

  /// Unit x axis of this frame expressed in the parent frame.
  Vec3 forward() const { return rotation * Vec3::UnitX(); }
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose inverse(const Pose& a) { return a.inverse(); }

/// Rotation angle of the relative rotation between two poses.
inline double rotation_distance(const Pose& a, const Pose& b) {
  return a.rotation.angularDistance(b.rotation);
}

inline double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation - b.translation).norm();
}

/// Rotation taking optical-frame axes into body axes (optical z -> body x).
inline Quat optical_to_body() {
  Mat3 r;
  r.col(0) = Vec3(0, -1, 0);
  r.col(1) = Vec3(0, 0, -1);
  r.col(2) = Vec3(1, 0, 0);
  return Quat(r);
}

/// Pose of a camera optical frame given the body-style pose of the camera housing.
inline Pose optical_frame(const Pose& housing) {
  return {housing.translation, (housing.rotation * optical_to_body()).normalized()};
}

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> intensity;  // empty, or one value per point
  std::string frame_id;
  double stamp = 0.0;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  bool has_intensity() const noexcept { return !intensity.empty(); }

  PointCloud transformed(const Pose& pose, std::string new_frame) const {
    PointCloud out;
    out.points.reserve(points.size());
    for (const auto& p : points) out.points.push_back(pose * p);
    out.intensity = intensity;
    out.frame_id = std::move(new_frame);
    out.stamp = stamp;
    return out;
  }
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }

  /// Grow (margin > 0) or shrink (margin < 0) on every side.
  Aabb expanded(double margin) const {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }

  bool valid() const { return (min.array() <= max.array()).all(); }
};

struct PinholeCamera {
  double fx = 115.0;
  double fy = 115.0;
  double cx = 80.0;
  double cy = 60.0;
  int width = 160;
  int height = 120;

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width && cy >= 0 &&
           cy < height;
  }

  void validate() const {
    if (!valid()) throw DegenerateInput("invalid pinhole camera parameters");
  }
};

/// Pixel coordinates of a camera-frame point; nullopt when the point is behind the camera.
inline std::optional<Vec2> project(const PinholeCamera& cam, const Vec3& p) {
  if (!(p.z() > 0.0)) return std::nullopt;
  return Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
}

/// Camera-frame point at the given depth (z) along the ray through pixel (u, v).
inline Vec3 unproject(const PinholeCamera& cam, const Vec2& uv, double depth) {
  return {(uv.x() - cam.cx) / cam.fx * depth, (uv.y() - cam.cy) / cam.fy * depth, depth};
}

/// Plane {x : normal . x = offset}.
struct PlaneModel {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::vector<std::size_t> inliers;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }

  /// Flip so the normal points toward `viewpoint`.
  void orient_toward(const Vec3& viewpoint) {
    if (signed_distance(viewpoint) < 0.0) {
      normal = -normal;
      offset = -offset;
    }
  }
};

struct MeanNormal {
  Vec3 mean;
  Vec3 normal;
};

/// Mean position and smallest-eigenvalue covariance direction of a point set.
/// When `sensor` is given the normal is flipped to face it.
inline MeanNormal mean_and_normal(std::span<const Vec3> points,
                                  std::optional<Vec3> sensor = std::nullopt) {
  if (points.size() < 3) throw DegenerateInput("mean_and_normal needs at least 3 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev(1) > 1e-12 * std::max(ev(2), std::numeric_limits<double>::min())) || ev(2) <= 0.0)
    throw DegenerateInput("mean_and_normal: points are collinear or coincident");
  Vec3 normal = eig.eigenvectors().col(0).normalized();
  if (sensor && normal.dot(*sensor - mean) < 0.0) normal = -normal;
  return {mean, normal};
}

inline MeanNormal mean_and_normal(const std::vector<Vec3>& points,
                                  std::optional<Vec3> sensor = std::nullopt) {
  return mean_and_normal(std::span<const Vec3>(points), sensor);
}

/// Any unit vector perpendicular to n; deterministic for a given n.
inline Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 helper = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  return n.cross(helper).normalized();
}

}  // namespace emberpipe
