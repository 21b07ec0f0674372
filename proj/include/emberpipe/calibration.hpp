#pragma once

// LiDAR -> thermal camera extrinsics from hole-center / heat-center pairs by
// Levenberg-Marquardt on the pixel reprojection error.

#include <cmath>
#include <vector>

#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/thermal.hpp"

namespace emberpipe::thermal {

struct CalibrationObservation {
  Vec3 point_lidar;  // hole center in the LiDAR frame
  Vec2 pixel;        // center of intensity
};

struct CalibrationParams {
  int max_iterations = 100;
  double max_residual_px = 2.0;
  double initial_lambda = 1e-3;
  double min_step = 1e-12;
};

struct CalibrationResult {
  Extrinsics extrinsics;
  double residual_px = 0.0;             // RMS reprojection error
  std::vector<double> residual_history;  // RMS after each accepted iterate, first entry = initial
  int iterations = 0;
};

namespace detail {

// RMS pixel error of the LiDAR->camera transform; infinity when any point
// falls behind the camera.
inline double reprojection_rms(const std::vector<CalibrationObservation>& obs, const PinholeCamera& cam,
                               const Mat3& R, const Vec3& t) {
  double sum = 0.0;
  for (const auto& o : obs) {
    const auto uv = project(cam, R * o.point_lidar + t);
    if (!uv) return std::numeric_limits<double>::infinity();
    sum += (*uv - o.pixel).squaredNorm();
  }
  return std::sqrt(sum / obs.size());
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace detail

/// Requires at least 6 observations. Throws NonConvergence when the normal
/// equations are rank deficient or the final RMS exceeds max_residual_px.
inline CalibrationResult calibrate_extrinsics(const std::vector<CalibrationObservation>& observations,
                                              const PinholeCamera& cam, const Extrinsics& initial,
                                              const CalibrationParams& params = {}) {
  if (observations.size() < 6) throw DegenerateInput("calibrate_extrinsics: need at least 6 observations");
  cam.validate();
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  // Optimize the LiDAR -> camera transform x_c = R x_l + t.
  const Pose inv = initial.thermal_camera_in_lidar_frame.inverse();
  Mat3 R = inv.rotation_matrix();
  Vec3 t = inv.translation;
  double cost = detail::reprojection_rms(observations, cam, R, t);
  if (!std::isfinite(cost)) throw NonConvergence("calibrate_extrinsics: initial guess puts points behind the camera");

  CalibrationResult res;
  res.residual_history.push_back(cost);
  double lambda = params.initial_lambda;
  for (int it = 0; it < params.max_iterations; ++it) {
    Mat6 JtJ = Mat6::Zero();
    Vec6 Jtr = Vec6::Zero();
    for (const auto& o : observations) {
      const Vec3 pc = R * o.point_lidar + t;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << cam.fx * iz, 0, -cam.fx * pc.x() * iz * iz, 0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
      // Left perturbation: pc' = pc + w x pc + v.
      Eigen::Matrix<double, 3, 6> dpc;
      dpc.leftCols<3>() = -detail::skew(pc);
      dpc.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> J = dproj * dpc;
      const Vec2 r = Vec2(cam.fx * pc.x() * iz + cam.cx, cam.fy * pc.y() * iz + cam.cy) - o.pixel;
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
    }
    Eigen::SelfAdjointEigenSolver<Mat6> eig(JtJ);
    const double ev_max = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-9 * std::max(ev_max, 1e-300)))
      throw NonConvergence("calibrate_extrinsics: observations do not constrain all 6 degrees of freedom");

    bool accepted = false;
    Vec6 step = Vec6::Zero();
    for (int tries = 0; tries < 20 && !accepted; ++tries) {
      Mat6 A = JtJ;
      A.diagonal() *= (1.0 + lambda);
      step = -A.ldlt().solve(Jtr);
      const Vec3 w = step.head<3>();
      const Mat3 dR = Eigen::AngleAxisd(w.norm(), w.norm() > 0 ? Vec3(w.normalized()) : Vec3::UnitZ()).toRotationMatrix();
      const Mat3 R_new = dR * R;
      const Vec3 t_new = dR * t + step.tail<3>();
      const double c_new = detail::reprojection_rms(observations, cam, R_new, t_new);
      if (c_new <= cost) {
        R = R_new;
        t = t_new;
        const double improvement = cost - c_new;
        cost = c_new;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        res.residual_history.push_back(cost);
        ++res.iterations;
        if (improvement <= 1e-12 * std::max(1.0, cost) && step.norm() < 1e-9) it = params.max_iterations;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || step.norm() < params.min_step) break;
  }

  Eigen::Quaterniond q(R);
  q.normalize();
  const Pose lidar_to_cam{t, q};
  res.extrinsics.thermal_camera_in_lidar_frame = lidar_to_cam.inverse();
  res.residual_px = cost;
  if (!(cost <= params.max_residual_px))
    throw NonConvergence("calibrate_extrinsics: residual " + std::to_string(cost) + " px exceeds limit");
  return res;
}

}  // namespace emberpipe::thermal
