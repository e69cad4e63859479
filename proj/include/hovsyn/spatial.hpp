// Copyright 2026 The hovsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "hovsyn/geometry.hpp"

namespace hovsyn {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void expand(const Aabb& other) {
    lo = lo.cwiseMin(other.lo);
    hi = hi.cwiseMax(other.hi);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }

  double distance_sq(const Vec3& p) const {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
      double v = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
      d += v * v;
    }
    return d;
  }

  /// Slab test along a ray p + t*d, t >= 0.
  bool intersects_ray(const Vec3& origin, const Vec3& inv_dir, double t_max) const {
    double t0 = 0.0, t1 = t_max;
    for (int k = 0; k < 3; ++k) {
      double ta = (lo[k] - origin[k]) * inv_dir[k];
      double tb = (hi[k] - origin[k]) * inv_dir[k];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
};

/// Static kd-tree over a point cloud; nearest-neighbour queries only.
class PointKdTree {
 public:
  PointKdTree() = default;

  explicit PointKdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    index_.resize(points_.size());
    std::iota(index_.begin(), index_.end(), 0);
    if (!points_.empty()) root_ = build(0, static_cast<int>(points_.size()), 0);
  }

  std::size_t size() const { return points_.size(); }
  const Vec3& point(int i) const { return points_[static_cast<std::size_t>(i)]; }

  /// Index of the nearest stored point to q.
  int nearest(const Vec3& q) const {
    int best = -1;
    double best_sq = std::numeric_limits<double>::infinity();
    search(root_, q, best, best_sq);
    return best;
  }

  double nearest_distance(const Vec3& q) const {
    int i = nearest(q);
    return i < 0 ? std::numeric_limits<double>::infinity() : (points_[static_cast<std::size_t>(i)] - q).norm();
  }

 private:
  struct Node {
    int axis = 0;
    int point = -1;    // index into points_
    int left = -1, right = -1;
  };

  int build(int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    int axis = depth % 3;
    int mid = (lo + hi) / 2;
    std::nth_element(index_.begin() + lo, index_.begin() + mid, index_.begin() + hi,
                     [&](int a, int b) { return points_[static_cast<std::size_t>(a)][axis] < points_[static_cast<std::size_t>(b)][axis]; });
    Node node;
    node.axis = axis;
    node.point = index_[static_cast<std::size_t>(mid)];
    int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    int left = build(lo, mid, depth + 1);
    int right = build(mid + 1, hi, depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void search(int node_id, const Vec3& q, int& best, double& best_sq) const {
    if (node_id < 0) return;
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    const Vec3& p = points_[static_cast<std::size_t>(node.point)];
    double d_sq = (p - q).squaredNorm();
    if (d_sq < best_sq) {
      best_sq = d_sq;
      best = node.point;
    }
    double delta = q[node.axis] - p[node.axis];
    int near = delta < 0.0 ? node.left : node.right;
    int far = delta < 0.0 ? node.right : node.left;
    search(near, q, best, best_sq);
    if (delta * delta < best_sq) search(far, q, best, best_sq);
  }

  std::vector<Vec3> points_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Closest point on triangle (a, b, c) to p. Ericson, Real-Time Collision
/// Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Moller-Trumbore ray/triangle intersection. Returns t >= 0 on hit.
inline bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                         const Vec3& c, double& t_out) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kEps) return false;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv_det;
  if (t < 0.0) return false;
  t_out = t;
  return true;
}

/// Median-split AABB tree over triangles. Supports closest-point queries and
/// ray crossing counts.
class TriangleBvh {
 public:
  TriangleBvh() = default;

  TriangleBvh(const std::vector<Vec3>* vertices, const std::vector<std::array<int, 3>>* triangles)
      : vertices_(vertices), triangles_(triangles) {
    const auto n = static_cast<int>(triangles_->size());
    tri_index_.resize(static_cast<std::size_t>(n));
    std::iota(tri_index_.begin(), tri_index_.end(), 0);
    if (n > 0) root_ = build(0, n);
  }

  struct ClosestHit {
    Vec3 point = Vec3::Zero();
    double distance = std::numeric_limits<double>::infinity();
    int triangle = -1;
  };

  ClosestHit closest_point(const Vec3& q) const {
    ClosestHit hit;
    double best_sq = std::numeric_limits<double>::infinity();
    closest(root_, q, hit, best_sq);
    hit.distance = std::sqrt(best_sq);
    return hit;
  }

  /// Number of triangle crossings along ray origin + t*dir, t > 0.
  int count_crossings(const Vec3& origin, const Vec3& dir) const {
    int count = 0;
    const Vec3 inv_dir = dir.cwiseInverse();
    crossings(root_, origin, dir, inv_dir, count);
    return count;
  }

  bool empty() const { return root_ < 0; }

 private:
  struct Node {
    Aabb box;
    int left = -1, right = -1;
    int first = 0, count = 0;  // leaf triangle range in tri_index_
  };

  Aabb triangle_box(int tri) const {
    const auto& t = (*triangles_)[static_cast<std::size_t>(tri)];
    Aabb box;
    for (int k = 0; k < 3; ++k) box.expand((*vertices_)[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])]);
    return box;
  }

  int build(int lo, int hi) {
    Node node;
    for (int i = lo; i < hi; ++i) node.box.expand(triangle_box(tri_index_[static_cast<std::size_t>(i)]));
    int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (hi - lo <= 4) {
      nodes_[static_cast<std::size_t>(self)].first = lo;
      nodes_[static_cast<std::size_t>(self)].count = hi - lo;
      return self;
    }
    const Vec3 extent = node.box.hi - node.box.lo;
    int axis = 0;
    if (extent[1] > extent[0]) axis = 1;
    if (extent[2] > extent[axis]) axis = 2;
    int mid = (lo + hi) / 2;
    std::nth_element(tri_index_.begin() + lo, tri_index_.begin() + mid, tri_index_.begin() + hi,
                     [&](int a, int b) {
                       return triangle_box(a).center()[axis] < triangle_box(b).center()[axis];
                     });
    int left = build(lo, mid);
    int right = build(mid, hi);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void closest(int node_id, const Vec3& q, ClosestHit& hit, double& best_sq) const {
    if (node_id < 0) return;
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.box.distance_sq(q) >= best_sq) return;
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        int tri = tri_index_[static_cast<std::size_t>(i)];
        const auto& t = (*triangles_)[static_cast<std::size_t>(tri)];
        Vec3 cp = closest_point_on_triangle(q, (*vertices_)[static_cast<std::size_t>(t[0])],
                                            (*vertices_)[static_cast<std::size_t>(t[1])],
                                            (*vertices_)[static_cast<std::size_t>(t[2])]);
        double d_sq = (cp - q).squaredNorm();
        if (d_sq < best_sq) {
          best_sq = d_sq;
          hit.point = cp;
          hit.triangle = tri;
        }
      }
      return;
    }
    // Visit the nearer child first to tighten the bound early.
    double dl = nodes_[static_cast<std::size_t>(node.left)].box.distance_sq(q);
    double dr = nodes_[static_cast<std::size_t>(node.right)].box.distance_sq(q);
    if (dl < dr) {
      closest(node.left, q, hit, best_sq);
      closest(node.right, q, hit, best_sq);
    } else {
      closest(node.right, q, hit, best_sq);
      closest(node.left, q, hit, best_sq);
    }
  }

  void crossings(int node_id, const Vec3& origin, const Vec3& dir, const Vec3& inv_dir,
                 int& count) const {
    if (node_id < 0) return;
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (!node.box.intersects_ray(origin, inv_dir, std::numeric_limits<double>::infinity())) return;
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& t = (*triangles_)[static_cast<std::size_t>(tri_index_[static_cast<std::size_t>(i)])];
        double hit_t;
        if (ray_triangle(origin, dir, (*vertices_)[static_cast<std::size_t>(t[0])],
                         (*vertices_)[static_cast<std::size_t>(t[1])],
                         (*vertices_)[static_cast<std::size_t>(t[2])], hit_t) &&
            hit_t > 1e-12) {
          ++count;
        }
      }
      return;
    }
    crossings(node.left, origin, dir, inv_dir, count);
    crossings(node.right, origin, dir, inv_dir, count);
  }

  const std::vector<Vec3>* vertices_ = nullptr;
  const std::vector<std::array<int, 3>>* triangles_ = nullptr;
  std::vector<int> tri_index_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace hovsyn
