#pragma once

// Circular opening detection in LiDAR clouds: plane extraction, orthographic
// rasterization onto each plane, morphological closing, and a circular Hough
// transform over the boundary of unoccupied regions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "emberpipe/geometry.hpp"
#include "emberpipe/ransac.hpp"

namespace emberpipe::holes {

/// Binary occupancy image of one plane. Pixel (i, j) has its center at
/// origin + i*resolution*axis_u + j*resolution*axis_v.
struct RasterPlaneImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> occupancy;  // row-major, 1 = occupied
  double resolution = 0.01;
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();

  RasterPlaneImage() = default;
  RasterPlaneImage(int w, int h, double res) : width(w), height(h), occupancy(std::size_t(w) * h, 0), resolution(res) {}

  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
  std::uint8_t& at(int i, int j) { return occupancy[std::size_t(j) * width + i]; }
  std::uint8_t at(int i, int j) const { return occupancy[std::size_t(j) * width + i]; }

  Vec2 to_pixel(const Vec3& p) const {
    const Vec3 r = p - origin;
    return {r.dot(axis_u) / resolution, r.dot(axis_v) / resolution};
  }
  Vec3 from_pixel(const Vec2& px) const {
    return origin + px.x() * resolution * axis_u + px.y() * resolution * axis_v;
  }

  std::size_t count_occupied() const {
    return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
  }
};

constexpr int kRasterPadding = 2;

/// Orthographic projection of a plane's inliers into an occupancy image.
/// Throws DegenerateInput when the inlier extent is below 4x4 pixels or the
/// image would exceed `max_pixels`.
inline RasterPlaneImage rasterize_plane(const PlaneModel& plane, const PointCloud& cloud, double resolution,
                                        std::size_t max_pixels = 4'000'000) {
  if (!(resolution > 0.0)) throw DegenerateInput("rasterize_plane: resolution must be > 0");
  if (plane.inliers.empty()) throw DegenerateInput("rasterize_plane: plane has no inliers");
  const Vec3 n = plane.normal.normalized();
  const Vec3 u_axis = std::abs(n.z()) < 0.9 ? Vec3(Vec3::UnitZ().cross(n).normalized()) : any_perpendicular(n);
  const Vec3 v_axis = n.cross(u_axis).normalized();
  const Vec3 plane_origin = plane.offset * n;

  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  std::vector<Vec2> coords;
  coords.reserve(plane.inliers.size());
  for (std::size_t idx : plane.inliers) {
    const Vec3 r = cloud.points.at(idx) - plane_origin;
    const Vec2 c(r.dot(u_axis), r.dot(v_axis));
    coords.push_back(c);
    umin = std::min(umin, c.x());
    umax = std::max(umax, c.x());
    vmin = std::min(vmin, c.y());
    vmax = std::max(vmax, c.y());
  }
  const double ext_u = (umax - umin) / resolution;
  const double ext_v = (vmax - vmin) / resolution;
  if (ext_u < 4.0 - 1e-9 || ext_v < 4.0 - 1e-9)
    throw DegenerateInput("rasterize_plane: inlier extent below 4x4 pixels");
  const long w = std::lround(ext_u) + 1 + 2 * kRasterPadding;
  const long h = std::lround(ext_v) + 1 + 2 * kRasterPadding;
  if (std::size_t(w) * std::size_t(h) > max_pixels) throw DegenerateInput("rasterize_plane: image too large");

  RasterPlaneImage img(int(w), int(h), resolution);
  img.axis_u = u_axis;
  img.axis_v = v_axis;
  img.origin = plane_origin + (umin - kRasterPadding * resolution) * u_axis + (vmin - kRasterPadding * resolution) * v_axis;
  for (const auto& c : coords) {
    const int i = int(std::lround((c.x() - umin) / resolution)) + kRasterPadding;
    const int j = int(std::lround((c.y() - vmin) / resolution)) + kRasterPadding;
    if (img.in_bounds(i, j)) img.at(i, j) = 1;
  }
  return img;
}

namespace detail {

// Per-row horizontal half-widths of a digital disk of the given radius.
inline std::vector<int> disk_half_widths(int radius) {
  std::vector<int> hw(2 * radius + 1);
  for (int dy = -radius; dy <= radius; ++dy)
    hw[dy + radius] = int(std::floor(std::sqrt(double(radius * radius - dy * dy)) + 1e-9));
  return hw;
}

inline std::vector<int> row_prefix(const RasterPlaneImage& img) {
  std::vector<int> p(std::size_t(img.width + 1) * img.height, 0);
  for (int y = 0; y < img.height; ++y) {
    int* row = &p[std::size_t(y) * (img.width + 1)];
    for (int x = 0; x < img.width; ++x) row[x + 1] = row[x] + img.at(x, y);
  }
  return p;
}

inline RasterPlaneImage dilate(const RasterPlaneImage& in, int radius) {
  RasterPlaneImage out = in;
  const auto hw = disk_half_widths(radius);
  const auto pre = row_prefix(in);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      bool any = false;
      for (int dy = -radius; dy <= radius && !any; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= in.height) continue;
        const int a = std::max(0, x - hw[dy + radius]);
        const int b = std::min(in.width - 1, x + hw[dy + radius]);
        const int* row = &pre[std::size_t(yy) * (in.width + 1)];
        any = row[b + 1] - row[a] > 0;
      }
      out.at(x, y) = any ? 1 : 0;
    }
  }
  return out;
}

// Out-of-image pixels count as occupied, so erosion never eats in from the border.
inline RasterPlaneImage erode(const RasterPlaneImage& in, int radius) {
  RasterPlaneImage out = in;
  const auto hw = disk_half_widths(radius);
  const auto pre = row_prefix(in);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      bool all = true;
      for (int dy = -radius; dy <= radius && all; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= in.height) continue;
        const int a = std::max(0, x - hw[dy + radius]);
        const int b = std::min(in.width - 1, x + hw[dy + radius]);
        const int* row = &pre[std::size_t(yy) * (in.width + 1)];
        all = row[b + 1] - row[a] == b - a + 1;
      }
      out.at(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

/// Binary closing (dilate, then erode) with a disk structuring element.
inline RasterPlaneImage close_gaps(const RasterPlaneImage& image, int kernel_radius) {
  if (kernel_radius < 1) throw DegenerateInput("close_gaps: kernel_radius must be >= 1");
  return detail::erode(detail::dilate(image, kernel_radius), kernel_radius);
}

struct Circle {
  Vec2 center;    // pixels
  double radius;  // pixels
  double score;   // fraction of circumference on the hole boundary
};

/// Unoccupied pixels with at least one occupied 4-neighbour.
inline std::vector<std::uint8_t> hole_boundary(const RasterPlaneImage& img) {
  std::vector<std::uint8_t> b(img.occupancy.size(), 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.at(x, y)) continue;
      const bool edge = (x > 0 && img.at(x - 1, y)) || (x + 1 < img.width && img.at(x + 1, y)) ||
                        (y > 0 && img.at(x, y - 1)) || (y + 1 < img.height && img.at(x, y + 1));
      b[std::size_t(y) * img.width + x] = edge ? 1 : 0;
    }
  return b;
}

/// Fraction of `samples` equally spaced circumference points that have a
/// boundary pixel within their 3x3 neighbourhood.
inline double circle_support(const std::vector<std::uint8_t>& boundary, int width, int height, const Vec2& c,
                             double r) {
  const int samples = std::max(16, int(std::ceil(2.0 * kPi * r)));
  int hit = 0;
  for (int k = 0; k < samples; ++k) {
    const double a = 2.0 * kPi * k / samples;
    const int sx = int(std::lround(c.x() + r * std::cos(a)));
    const int sy = int(std::lround(c.y() + r * std::sin(a)));
    bool found = false;
    for (int dy = -1; dy <= 1 && !found; ++dy)
      for (int dx = -1; dx <= 1 && !found; ++dx) {
        const int x = sx + dx, y = sy + dy;
        if (x >= 0 && y >= 0 && x < width && y < height && boundary[std::size_t(y) * width + x]) found = true;
      }
    hit += found;
  }
  return double(hit) / samples;
}

/// Fraction of pixels strictly inside radius r - 1 that are unoccupied.
inline double interior_emptiness(const RasterPlaneImage& img, const Vec2& c, double r) {
  const double ri = std::max(0.5, r - 1.0);
  int total = 0, empty = 0;
  for (int y = int(std::floor(c.y() - ri)); y <= int(std::ceil(c.y() + ri)); ++y)
    for (int x = int(std::floor(c.x() - ri)); x <= int(std::ceil(c.x() + ri)); ++x) {
      if ((Vec2(x, y) - c).squaredNorm() > ri * ri) continue;
      ++total;
      if (!img.in_bounds(x, y) || !img.at(x, y)) ++empty;
    }
  return total ? double(empty) / total : 0.0;
}

/// Fraction of pixels in the annulus r + 1 <= d <= r + 3 that are occupied;
/// out-of-image pixels count as unoccupied.
inline double surround_occupancy(const RasterPlaneImage& img, const Vec2& c, double r) {
  const double r0 = r + 1.0, r1 = r + 3.0;
  int total = 0, occ = 0;
  for (int y = int(std::floor(c.y() - r1)); y <= int(std::ceil(c.y() + r1)); ++y)
    for (int x = int(std::floor(c.x() - r1)); x <= int(std::ceil(c.x() + r1)); ++x) {
      const double d2 = (Vec2(x, y) - c).squaredNorm();
      if (d2 < r0 * r0 || d2 > r1 * r1) continue;
      ++total;
      if (img.in_bounds(x, y) && img.at(x, y)) ++occ;
    }
  return total ? double(occ) / total : 0.0;
}

struct CircleParams {
  double min_score = 0.6;
  double min_interior_emptiness = 0.9;
  double min_surround = 0.85;
  double vote_fraction = 0.3;  // accumulator pre-filter, relative to ring size
  bool refine = true;
};

namespace detail {

inline std::vector<Eigen::Vector2i> ring_offsets(int r) {
  std::vector<Eigen::Vector2i> out;
  for (int dy = -r - 1; dy <= r + 1; ++dy)
    for (int dx = -r - 1; dx <= r + 1; ++dx) {
      const double d = std::sqrt(double(dx * dx + dy * dy));
      if (d >= r - 0.5 && d < r + 0.5) out.emplace_back(dx, dy);
    }
  return out;
}

// Algebraic least-squares circle through boundary pixels near the candidate.
// Marks empty pixels whose 4-connected empty component has at most
// `max_area` pixels and spans at least `min_extent` pixels on both axes.
inline std::vector<std::uint8_t> candidate_components(const RasterPlaneImage& img, std::size_t max_area,
                                                      int min_extent) {
  const int W = img.width, H = img.height;
  std::vector<int> label(std::size_t(W) * H, -1);
  std::vector<std::uint8_t> keep(label.size(), 0);
  std::vector<std::size_t> stack, members;
  int next = 0;
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (img.occupancy[start] || label[start] >= 0) continue;
    members.clear();
    stack.assign(1, start);
    label[start] = next;
    int x0 = W, x1 = -1, y0 = H, y1 = -1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      members.push_back(i);
      const int x = int(i % W), y = int(i / W);
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
      const std::size_t nb[4] = {i - 1, i + 1, i - std::size_t(W), i + std::size_t(W)};
      const bool ok[4] = {x > 0, x + 1 < W, y > 0, y + 1 < H};
      for (int k = 0; k < 4; ++k)
        if (ok[k] && !img.occupancy[nb[k]] && label[nb[k]] < 0) {
          label[nb[k]] = next;
          stack.push_back(nb[k]);
        }
    }
    ++next;
    if (members.size() <= max_area && x1 - x0 + 1 >= min_extent && y1 - y0 + 1 >= min_extent)
      for (auto i : members) keep[i] = 1;
  }
  return keep;
}

inline std::optional<Circle> refine_circle(const std::vector<std::uint8_t>& boundary, int width, int height,
                                           const Circle& c) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  int n = 0;
  const int r = int(std::ceil(c.radius + 2));
  for (int y = int(c.center.y()) - r; y <= int(c.center.y()) + r; ++y)
    for (int x = int(c.center.x()) - r; x <= int(c.center.x()) + r; ++x) {
      if (x < 0 || y < 0 || x >= width || y >= height || !boundary[std::size_t(y) * width + x]) continue;
      const double d = (Vec2(x, y) - c.center).norm();
      if (std::abs(d - c.radius) > 1.5) continue;
      const Eigen::Vector3d row(x, y, 1.0);
      ata += row * row.transpose();
      atb += row * double(x * x + y * y);
      ++n;
    }
  if (n < 8) return std::nullopt;
  const Eigen::Vector3d sol = ata.ldlt().solve(atb);
  const Vec2 center(0.5 * sol(0), 0.5 * sol(1));
  const double rr = sol(2) + center.squaredNorm();
  if (!(rr > 0.0)) return std::nullopt;
  Circle out{center, std::sqrt(rr), c.score};
  if ((out.center - c.center).norm() > 2.0 || std::abs(out.radius - c.radius) > 2.0) return std::nullopt;
  return out;
}

}  // namespace detail

/// Circles bounding unoccupied regions, radius in [r_min, r_max] pixels.
/// Candidates come from a circular Hough accumulator over hole-boundary
/// pixels; each is re-scored exactly, must have an empty interior and an
/// occupied surrounding annulus, is kept when score >= min_score, then
/// non-maximum suppressed within r_min. Sorted by score, descending.
/// Returned radii are measured to the occupied edge (boundary pixel centers
/// sit half a pixel inside it).
inline std::vector<Circle> detect_circles(const RasterPlaneImage& image, int r_min, int r_max,
                                          const CircleParams& params = {}) {
  if (r_min < 2) throw DegenerateInput("detect_circles: r_min must be >= 2");
  std::vector<Circle> found;
  if (r_max < r_min || image.width == 0 || image.height == 0) return found;
  const int W = image.width, H = image.height;
  const auto boundary = hole_boundary(image);
  // Only compact empty regions can hold a circle in range; huge open areas
  // and specks contribute no votes.
  const auto voters =
      detail::candidate_components(image, std::size_t(3.0 * kPi * (r_max + 1) * (r_max + 1)), 2 * r_min - 2);
  std::vector<Eigen::Vector2i> bpix;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (boundary[std::size_t(y) * W + x] && voters[std::size_t(y) * W + x]) bpix.emplace_back(x, y);
  if (bpix.empty()) return found;

  struct Candidate {
    Circle c;
    int votes;
  };
  std::vector<Candidate> candidates;
  std::vector<int> acc(std::size_t(W) * H);
  for (int r = r_min; r <= r_max; ++r) {
    const auto ring = detail::ring_offsets(r);
    std::fill(acc.begin(), acc.end(), 0);
    for (const auto& b : bpix)
      for (const auto& o : ring) {
        const int x = b.x() - o.x(), y = b.y() - o.y();
        if (x >= 0 && y >= 0 && x < W && y < H) ++acc[std::size_t(y) * W + x];
      }
    const int min_votes = std::max(4, int(params.vote_fraction * ring.size()));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int v = acc[std::size_t(y) * W + x];
        if (v < min_votes) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
          for (int dx = -1; dx <= 1 && is_max; ++dx) {
            if (!dx && !dy) continue;
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= W || yy >= H) continue;
            const int o = acc[std::size_t(yy) * W + xx];
            // Strict on one side so plateaus yield exactly one maximum.
            if (o > v || (o == v && (dy < 0 || (dy == 0 && dx < 0)))) is_max = false;
          }
        if (!is_max) continue;
        const Vec2 c(x, y);
        // Support is measured on the pixel-center circle (r - 0.5).
        const double score = circle_support(boundary, W, H, c, r - 0.5);
        if (score < params.min_score) continue;
        if (interior_emptiness(image, c, r - 0.5) < params.min_interior_emptiness) continue;
        if (surround_occupancy(image, c, r) < params.min_surround) continue;
        candidates.push_back({{c, double(r), score}, v});
      }
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.c.score != b.c.score) return a.c.score > b.c.score;
    return a.votes > b.votes;
  });
  for (const auto& cand : candidates) {
    bool suppressed = false;
    for (const auto& k : found)
      if ((k.center - cand.c.center).norm() < r_min) suppressed = true;
    if (suppressed) continue;
    Circle c = cand.c;
    if (params.refine) {
      Circle pix{c.center, c.radius - 0.5, c.score};
      if (auto ref = detail::refine_circle(boundary, W, H, pix)) {
        c.center = ref->center;
        c.radius = ref->radius + 0.5;
      }
    }
    found.push_back(c);
  }
  return found;
}

/// Mean spacing, in pixels, of raw returns in the annulus r + 1 .. r + 8
/// around a circle; 1 when every pixel is occupied.
inline double local_pitch(const RasterPlaneImage& raw, const Vec2& c, double r) {
  const double r0 = r + 1.0, r1 = r + 8.0;
  int total = 0, occ = 0;
  for (int y = int(std::floor(c.y() - r1)); y <= int(std::ceil(c.y() + r1)); ++y)
    for (int x = int(std::floor(c.x() - r1)); x <= int(std::ceil(c.x() + r1)); ++x) {
      const double d2 = (Vec2(x, y) - c).squaredNorm();
      if (d2 < r0 * r0 || d2 > r1 * r1 || !raw.in_bounds(x, y)) continue;
      ++total;
      occ += raw.at(x, y);
    }
  if (occ == 0) return 1.0;
  return 1.0 / std::sqrt(double(occ) / total);
}

struct HoleDetection {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  double diameter = 0.0;
  double score = 0.0;
  PlaneModel support_plane;
  double timestamp = 0.0;
};

struct HoleDetectorParams {
  RansacParams ransac{};
  double resolution = 0.01;
  int kernel_radius = 2;
  double min_diameter = 0.10;
  double max_diameter = 0.20;
  double max_range = 5.0;  // points farther from the sensor are ignored
  std::size_t max_pixels = 4'000'000;
  CircleParams circles{};
  // Sparse sampling leaves the nearest wall returns outside the true rim, so
  // the fitted radius is shrunk by gain * (local point pitch - 1 px).
  double edge_bias_gain = 0.65;

  int r_min_px() const { return std::max(2, int(std::floor(0.5 * min_diameter / resolution)) - 2); }
  int r_max_px() const { return int(std::ceil(0.5 * max_diameter / resolution)) + 2; }
};

/// Full pipeline on a cloud in the sensor frame. Detections are expressed in
/// the frame `sensor_pose` maps into, normals facing the sensor.
inline std::vector<HoleDetection> detect_holes(const PointCloud& cloud, const Pose& sensor_pose,
                                               const HoleDetectorParams& params) {
  PointCloud near;
  near.frame_id = cloud.frame_id;
  const double r2 = params.max_range * params.max_range;
  for (const auto& p : cloud.points)
    if (p.squaredNorm() <= r2) near.points.push_back(p);

  std::vector<HoleDetection> out;
  const auto planes = fit_planes_ransac(near, params.ransac);
  for (auto plane : planes) {
    plane.orient_toward(Vec3::Zero());
    RasterPlaneImage img;
    try {
      img = rasterize_plane(plane, near, params.resolution, params.max_pixels);
    } catch (const DegenerateInput&) {
      continue;
    }
    const auto closed = close_gaps(img, params.kernel_radius);
    for (const auto& c : detect_circles(closed, params.r_min_px(), params.r_max_px(), params.circles)) {
      const double pitch = local_pitch(img, c.center, c.radius);
      const double radius = c.radius - params.edge_bias_gain * std::max(0.0, pitch - 1.0);
      const double diameter = 2.0 * radius * params.resolution;
      if (diameter < params.min_diameter || diameter > params.max_diameter) continue;
      const Vec3 center = closed.from_pixel(c.center);
      HoleDetection det;
      det.position = sensor_pose * center;
      det.normal = (sensor_pose.rotation * plane.normal).normalized();
      det.diameter = diameter;
      det.score = c.score;
      det.timestamp = cloud.stamp;
      det.support_plane = plane;
      out.push_back(std::move(det));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const HoleDetection& a, const HoleDetection& b) { return a.score > b.score; });
  return out;
}

}  // namespace emberpipe::holes
