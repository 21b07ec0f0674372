#pragma once

// Static 3D k-d tree over a point array for nearest-neighbour queries.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <vector>

#include "emberpipe/geometry.hpp"

namespace emberpipe {

class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) { build(); }

  const std::vector<Vec3>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

  struct Neighbor {
    std::size_t index;
    double sq_dist;
  };

  /// Closest point within max_dist, if any. Ties resolve to the lower index.
  std::optional<Neighbor> nearest(const Vec3& q, double max_dist = std::numeric_limits<double>::infinity()) const {
    if (nodes_.empty()) return std::nullopt;
    Neighbor best{std::numeric_limits<std::size_t>::max(), max_dist * max_dist};
    nearest_rec(0, q, best);
    if (best.index == std::numeric_limits<std::size_t>::max()) return std::nullopt;
    return best;
  }

  /// Up to k nearest points, closest first.
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const {
    std::vector<Neighbor> heap;
    if (nodes_.empty() || k == 0) return heap;
    knn_rec(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), less);
    return heap;
  }

 private:
  static constexpr std::size_t kLeaf = 8;
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  static bool less(const Neighbor& a, const Neighbor& b) {
    return a.sq_dist != b.sq_dist ? a.sq_dist < b.sq_dist : a.index < b.index;
  }

  void build() {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    if (!points_.empty()) build_rec(0, std::uint32_t(points_.size()));
  }

  int build_rec(std::uint32_t begin, std::uint32_t end) {
    const int id = int(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeaf) return id;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double pa = points_[a](axis), pb = points_[b](axis);
                       return pa != pb ? pa < pb : a < b;
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]](axis);
    const int l = build_rec(begin, mid);
    const int r = build_rec(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void nearest_rec(int id, const Vec3& q, Neighbor& best) const {
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (cand.sq_dist < best.sq_dist || (cand.sq_dist == best.sq_dist && idx < best.index)) best = cand;
      }
      return;
    }
    const double diff = q(n.axis) - n.split;
    const int first = diff < 0 ? n.left : n.right;
    const int second = diff < 0 ? n.right : n.left;
    nearest_rec(first, q, best);
    if (diff * diff <= best.sq_dist) nearest_rec(second, q, best);
  }

  void knn_rec(int id, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), less);
        } else if (less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), less);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), less);
        }
      }
      return;
    }
    const double diff = q(n.axis) - n.split;
    const int first = diff < 0 ? n.left : n.right;
    const int second = diff < 0 ? n.right : n.left;
    knn_rec(first, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().sq_dist) knn_rec(second, q, k, heap);
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace emberpipe
