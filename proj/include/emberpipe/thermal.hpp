#pragma once

// Heat-source contours in thermal frames and their 3D localization, either
// by pooling LiDAR returns inside the contour's box or from the box width of
// a heating element of known size.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "emberpipe/detection.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/thermal_image.hpp"

namespace emberpipe::thermal {

struct ThermalContour {
  std::vector<Eigen::Vector2i> pixels;
  int area = 0;
  int u0 = 0, v0 = 0, u1 = 0, v1 = 0;  // inclusive bounding box
  Vec2 center_of_intensity = Vec2::Zero();
  double min_intensity = 0.0;
  double max_intensity = 0.0;
  double mean_intensity = 0.0;

  int bbox_width() const { return u1 - u0 + 1; }
  int bbox_height() const { return v1 - v0 + 1; }
};

/// 4-connected components of pixels with lower <= I <= upper whose area lies
/// in [min_area, max_area]. Components are ordered by their first pixel in
/// row-major scan order.
inline std::vector<ThermalContour> detect_heat(const ThermalImage& image, double lower, double upper, int min_area,
                                               int max_area = std::numeric_limits<int>::max()) {
  if (!(lower < upper)) throw DegenerateInput("detect_heat: lower must be < upper");
  if (min_area < 1) throw DegenerateInput("detect_heat: min_area must be >= 1");
  const int W = image.width, H = image.height;
  std::vector<std::uint8_t> visited(std::size_t(W) * H, 0);
  auto in_band = [&](int u, int v) {
    const double x = image.at(u, v);
    return x >= lower && x <= upper;
  };
  std::vector<ThermalContour> out;
  std::vector<Eigen::Vector2i> stack;
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      if (visited[std::size_t(v) * W + u] || !in_band(u, v)) continue;
      ThermalContour c;
      c.u0 = c.u1 = u;
      c.v0 = c.v1 = v;
      c.min_intensity = std::numeric_limits<double>::infinity();
      c.max_intensity = -c.min_intensity;
      double wsum = 0.0, sum = 0.0;
      Vec2 wpos = Vec2::Zero();
      stack.assign(1, {u, v});
      visited[std::size_t(v) * W + u] = 1;
      while (!stack.empty()) {
        const Eigen::Vector2i p = stack.back();
        stack.pop_back();
        c.pixels.push_back(p);
        const double x = image.at(p.x(), p.y());
        sum += x;
        wsum += x;
        wpos += x * p.cast<double>();
        c.min_intensity = std::min(c.min_intensity, x);
        c.max_intensity = std::max(c.max_intensity, x);
        c.u0 = std::min(c.u0, p.x());
        c.u1 = std::max(c.u1, p.x());
        c.v0 = std::min(c.v0, p.y());
        c.v1 = std::max(c.v1, p.y());
        static constexpr int du[4] = {1, -1, 0, 0}, dv[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nu = p.x() + du[k], nv = p.y() + dv[k];
          if (nu < 0 || nv < 0 || nu >= W || nv >= H) continue;
          auto& vis = visited[std::size_t(nv) * W + nu];
          if (vis || !in_band(nu, nv)) continue;
          vis = 1;
          stack.emplace_back(nu, nv);
        }
      }
      c.area = int(c.pixels.size());
      if (c.area < min_area || c.area > max_area) continue;
      c.mean_intensity = sum / c.area;
      // Negative or zero total weight falls back to the plain centroid.
      if (wsum > 0.0) {
        c.center_of_intensity = wpos / wsum;
      } else {
        Vec2 m = Vec2::Zero();
        for (const auto& p : c.pixels) m += p.cast<double>();
        c.center_of_intensity = m / c.area;
      }
      // Guard against rounding just outside the box on thin components.
      c.center_of_intensity.x() = std::clamp(c.center_of_intensity.x(), double(c.u0), double(c.u1));
      c.center_of_intensity.y() = std::clamp(c.center_of_intensity.y(), double(c.v0), double(c.v1));
      std::sort(c.pixels.begin(), c.pixels.end(), [](const auto& a, const auto& b) {
        return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
      });
      out.push_back(std::move(c));
    }
  return out;
}

/// Thermal camera optical frame expressed in the LiDAR frame.
struct Extrinsics {
  Pose thermal_camera_in_lidar_frame;
};

/// Pools LiDAR returns whose projection falls inside the contour's pixel box
/// and reports their mean position and normal in the frame `sensor_pose`
/// (LiDAR in that frame) maps into.
inline Detection localize_heat_lidar(const ThermalContour& contour, const PointCloud& cloud, const Extrinsics& extr,
                                     const PinholeCamera& cam, const Pose& sensor_pose, double timestamp = 0.0) {
  const Pose lidar_to_cam = extr.thermal_camera_in_lidar_frame.inverse();
  const double umin = contour.u0 - 0.5, umax = contour.u1 + 0.5;
  const double vmin = contour.v0 - 0.5, vmax = contour.v1 + 0.5;
  std::vector<Vec3> support;
  for (const auto& p : cloud.points) {
    const auto uv = project(cam, lidar_to_cam * p);
    if (!uv) continue;
    if (uv->x() >= umin && uv->x() <= umax && uv->y() >= vmin && uv->y() <= vmax) support.push_back(p);
  }
  if (support.size() < 3) throw InsufficientSupport("localize_heat_lidar: fewer than 3 points in the heat box");
  MeanNormal mn;
  try {
    mn = mean_and_normal(support, Vec3::Zero());
  } catch (const DegenerateInput&) {
    throw InsufficientSupport("localize_heat_lidar: points in the heat box are degenerate");
  }
  Detection d;
  d.kind = DetectionKind::Thermal;
  d.position = sensor_pose * mn.mean;
  d.normal = (sensor_pose.rotation * mn.normal).normalized();
  d.timestamp = timestamp;
  return d;
}

/// Monotone piecewise-linear map from raw bbox distance to corrected
/// distance. Empty table means identity. Outside the table the end segments
/// are extended linearly.
class BboxCalibration {
 public:
  BboxCalibration() = default;
  explicit BboxCalibration(std::vector<std::pair<double, double>> table) : table_(std::move(table)) {
    std::sort(table_.begin(), table_.end());
    for (std::size_t i = 1; i < table_.size(); ++i)
      if (!(table_[i].first > table_[i - 1].first) || !(table_[i].second > table_[i - 1].second))
        throw DegenerateInput("bbox calibration table must be strictly increasing");
  }

  static BboxCalibration identity() { return {}; }

  const std::vector<std::pair<double, double>>& table() const { return table_; }

  double operator()(double raw) const {
    if (table_.empty()) return raw;
    if (table_.size() == 1) return raw + (table_[0].second - table_[0].first);
    std::size_t i = 1;
    while (i + 1 < table_.size() && raw > table_[i].first) ++i;
    const auto& [x0, y0] = table_[i - 1];
    const auto& [x1, y1] = table_[i];
    return y0 + (raw - x0) * (y1 - y0) / (x1 - x0);
  }

 private:
  std::vector<std::pair<double, double>> table_;
};

/// Similar-triangles range of an element of known size spanning `width_px`.
inline double distance_from_width(double width_px, const PinholeCamera& cam, double element_size) {
  if (!(width_px >= 2.0)) throw OutOfRange("bbox width below 2 px");
  if (!(element_size > 0.0)) throw DegenerateInput("element size must be > 0");
  return cam.fx * element_size / width_px;
}

struct BboxEstimate {
  double distance = 0.0;
  Detection detection;
};

/// Range from the contour's box width, then the center of intensity
/// back-projected to that depth. The detection is expressed in the frame
/// `camera_pose` (optical frame) maps into; its normal faces the camera.
inline BboxEstimate estimate_distance_bbox(const ThermalContour& contour, const PinholeCamera& cam,
                                           double element_size, const BboxCalibration& calib = {},
                                           const Pose& camera_pose = Pose::identity(), double timestamp = 0.0) {
  const double raw = distance_from_width(double(contour.bbox_width()), cam, element_size);
  const double distance = calib(raw);
  if (!(distance > 0.0)) throw OutOfRange("calibrated bbox distance is not positive");
  const Vec3 p_cam = unproject(cam, contour.center_of_intensity, distance);
  BboxEstimate est;
  est.distance = distance;
  est.detection.kind = DetectionKind::Thermal;
  est.detection.position = camera_pose * p_cam;
  est.detection.normal = (camera_pose.rotation * (-p_cam.normalized())).normalized();
  est.detection.timestamp = timestamp;
  return est;
}

}  // namespace emberpipe::thermal
