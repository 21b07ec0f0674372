#pragma once

// Sequential RANSAC plane extraction.

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <numeric>
#include <optional>
#include <vector>

#include "emberpipe/geometry.hpp"
#include "emberpipe/rng.hpp"

namespace emberpipe {

struct RansacParams {
  std::size_t max_planes = 4;
  double dist_threshold = 0.03;
  std::size_t min_inliers = 150;
  int iterations = 400;
  std::uint64_t seed = 0;
  // Hypotheses are scored on at most this many points; the winner's inlier
  // set is always recomputed on the full remaining cloud.
  std::size_t score_sample = 4000;
};

namespace detail {

struct Hypothesis {
  Vec3 normal;
  double offset;
  std::size_t count = 0;
  double rms = 0.0;
};

inline void canonicalize(Vec3& n, double& d) {
  // Largest-magnitude component positive, so results do not depend on sample order.
  Eigen::Index i;
  n.cwiseAbs().maxCoeff(&i);
  if (n(i) < 0.0) {
    n = -n;
    d = -d;
  }
}

inline std::vector<std::size_t> collect_inliers(const std::vector<Vec3>& pts,
                                                const std::vector<std::size_t>& idx,
                                                const Vec3& n, double d, double thr) {
  std::vector<std::size_t> out;
  for (std::size_t i : idx)
    if (std::abs(n.dot(pts[i]) - d) <= thr) out.push_back(i);
  return out;
}

}  // namespace detail

/// Extract up to `max_planes` planes, each with at least `min_inliers` points.
/// Inliers of plane k are removed before plane k+1 is searched. Output is sorted
/// by decreasing inlier count and fully determined by the seed.
inline std::vector<PlaneModel> fit_planes_ransac(const PointCloud& cloud, const RansacParams& params) {
  if (!(params.dist_threshold > 0.0)) throw DegenerateInput("ransac: dist_threshold must be > 0");
  if (params.iterations < 1) throw DegenerateInput("ransac: iterations must be >= 1");

  const auto& pts = cloud.points;
  Rng rng(params.seed);
  std::vector<std::size_t> remaining(pts.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<PlaneModel> planes;
  const std::size_t min_support = std::max<std::size_t>(3, params.min_inliers);
  const double thr = params.dist_threshold;

  while (planes.size() < params.max_planes && remaining.size() >= min_support) {
    // Scoring subset (partial Fisher-Yates on a copy).
    std::vector<std::size_t> scoring = remaining;
    if (scoring.size() > params.score_sample) {
      for (std::size_t i = 0; i < params.score_sample; ++i) {
        std::size_t j = i + rng.index(scoring.size() - i);
        std::swap(scoring[i], scoring[j]);
      }
      scoring.resize(params.score_sample);
    }

    std::optional<detail::Hypothesis> best;
    for (int it = 0; it < params.iterations; ++it) {
      const std::size_t a = remaining[rng.index(remaining.size())];
      const std::size_t b = remaining[rng.index(remaining.size())];
      const std::size_t c = remaining[rng.index(remaining.size())];
      if (a == b || b == c || a == c) continue;
      Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
      const double len = n.norm();
      if (len < 1e-12) continue;
      n /= len;
      double d = n.dot(pts[a]);
      std::size_t count = 0;
      double sq = 0.0;
      for (std::size_t i : scoring) {
        const double r = n.dot(pts[i]) - d;
        if (std::abs(r) <= thr) {
          ++count;
          sq += r * r;
        }
      }
      const double rms = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
      if (!best || count > best->count || (count == best->count && rms < best->rms))
        best = detail::Hypothesis{n, d, count, rms};
    }
    if (!best || best->count == 0) break;

    auto inliers = detail::collect_inliers(pts, remaining, best->normal, best->offset, thr);
    Vec3 normal = best->normal;
    double offset = best->offset;
    // Least-squares refinement; kept only if it does not lose support.
    if (inliers.size() >= 3) {
      std::vector<Vec3> sub;
      sub.reserve(inliers.size());
      for (std::size_t i : inliers) sub.push_back(pts[i]);
      try {
        const auto mn = mean_and_normal(sub);
        const double d_ref = mn.normal.dot(mn.mean);
        auto refined = detail::collect_inliers(pts, remaining, mn.normal, d_ref, thr);
        if (refined.size() >= inliers.size()) {
          normal = mn.normal;
          offset = d_ref;
          inliers = std::move(refined);
        }
      } catch (const DegenerateInput&) {
      }
    }
    if (inliers.size() < min_support) break;

    detail::canonicalize(normal, offset);
    PlaneModel plane{normal, offset, inliers};

    std::vector<std::size_t> rest;
    rest.reserve(remaining.size() - inliers.size());
    std::set_difference(remaining.begin(), remaining.end(), inliers.begin(), inliers.end(),
                        std::back_inserter(rest));
    remaining = std::move(rest);
    planes.push_back(std::move(plane));
  }

  std::stable_sort(planes.begin(), planes.end(), [](const PlaneModel& a, const PlaneModel& b) {
    return a.inliers.size() > b.inliers.size();
  });
  return planes;
}

}  // namespace emberpipe
