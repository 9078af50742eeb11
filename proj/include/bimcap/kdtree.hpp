#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace bimcap {

// Static kd-tree over a borrowed point array. Squared distances are computed with the
// same expression a brute-force scan would use, so results match it bit for bit.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  explicit KdTree(std::span<const Point> points) : points_(points), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, order_.size());
    }
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }

  static double squared_distance(const Point& a, const Point& b) { return (a - b).squaredNorm(); }

  struct Nearest {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  // Nearest point; ties resolve to the lowest index. `exclude` skips one index.
  [[nodiscard]] Nearest nearest(const Point& q,
                                std::size_t exclude = std::numeric_limits<std::size_t>::max()) const {
    Nearest best;
    if (!nodes_.empty()) nearest_rec(0, q, exclude, best);
    return best;
  }

  // Indices of all points with squared distance <= radius^2, ascending.
  [[nodiscard]] std::vector<std::size_t> radius_search(const Point& q, double radius) const {
    std::vector<std::size_t> out;
    if (!nodes_.empty()) radius_rec(0, q, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    Point lo;
    Point hi;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    Point lo = Point::Constant(std::numeric_limits<double>::infinity());
    Point hi = Point::Constant(-std::numeric_limits<double>::infinity());
    for (std::size_t k = begin; k < end; ++k) {
      lo = lo.cwiseMin(points_[order_[k]]);
      hi = hi.cwiseMax(points_[order_[k]]);
    }
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = lo;
    node.hi = hi;
    if (end - begin > kLeafSize) {
      int axis = 0;
      (hi - lo).maxCoeff(&axis);
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) {
                         const double va = points_[a][axis];
                         const double vb = points_[b][axis];
                         return va < vb || (va == vb && a < b);
                       });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
    nodes_[id] = node;
    return id;
  }

  static double box_distance2(const Node& n, const Point& q) {
    double d2 = 0.0;
    for (int a = 0; a < Dim; ++a) {
      const double d = std::max({n.lo[a] - q[a], 0.0, q[a] - n.hi[a]});
      d2 += d * d;
    }
    return d2;
  }

  void nearest_rec(std::size_t id, const Point& q, std::size_t exclude, Nearest& best) const {
    const Node& n = nodes_[id];
    if (box_distance2(n, q) > best.squared_distance) return;
    if (n.axis < 0) {
      for (std::size_t k = n.begin; k < n.end; ++k) {
        const std::size_t idx = order_[k];
        if (idx == exclude) continue;
        const double d2 = squared_distance(points_[idx], q);
        if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
          best = {idx, d2};
        }
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    nearest_rec(go_left ? n.left : n.right, q, exclude, best);
    nearest_rec(go_left ? n.right : n.left, q, exclude, best);
  }

  void radius_rec(std::size_t id, const Point& q, double r2, std::vector<std::size_t>& out) const {
    const Node& n = nodes_[id];
    if (box_distance2(n, q) > r2) return;
    if (n.axis < 0) {
      for (std::size_t k = n.begin; k < n.end; ++k) {
        const std::size_t idx = order_[k];
        if (squared_distance(points_[idx], q) <= r2) out.push_back(idx);
      }
      return;
    }
    radius_rec(n.left, q, r2, out);
    radius_rec(n.right, q, r2, out);
  }

  std::span<const Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace bimcap
