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

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hovsyn/error.hpp"
#include "hovsyn/geometry.hpp"
#include "hovsyn/mesh.hpp"
#include "hovsyn/spatial.hpp"

namespace hovsyn {

/// One network-style pose prediction: 21 hand joints, object centroid, and
/// object rotation as an so(3) vector.
struct PosePrediction {
  std::array<Vec3, 21> hand_joints{};
  Vec3 object_centroid = Vec3::Zero();
  Vec3 object_rotation = Vec3::Zero();
};

// ---------------------------------------------------------------------------
// Training losses. loc / cor / sym are squared-distance means (m^2); ord is
// an absolute projected distance (m). The mixed units are intentional and
// carried into the weighted total as-is.
// ---------------------------------------------------------------------------

/// Mean squared distance over the 22 joints (21 hand + object centroid).
inline double loss_loc(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  if (pred.size() != 22 || gt.size() != 22)
    throw std::invalid_argument("loss_loc expects exactly 22 points per side");
  double sum = 0.0;
  for (std::size_t i = 0; i < 22; ++i) sum += (pred[i] - gt[i]).squaredNorm();
  return sum / 22.0;
}

/// Mean squared distance of the rotated canonical corners to the target
/// corners: (1/8) sum ||exp(r_o) c_i - c_hat_i||^2.
inline double loss_cor(const Vec3& r_o, const std::array<Vec3, 8>& corners_canonical,
                       const std::array<Vec3, 8>& corners_gt) {
  const Mat3 R = so3_exp(r_o);
  double sum = 0.0;
  for (int i = 0; i < 8; ++i)
    sum += (R * corners_canonical[static_cast<std::size_t>(i)] - corners_gt[static_cast<std::size_t>(i)]).squaredNorm();
  return sum / 8.0;
}

/// Ground-truth depth ordering of every (hand joint, corner) pair along the
/// view direction: +1 / -1, or 0 inside the dead zone (never penalized).
struct OrdRelations {
  std::array<std::array<std::int8_t, 8>, 21> sign{};
};

inline OrdRelations ord_relations(std::span<const Vec3> gt_hand,
                                  const std::array<Vec3, 8>& gt_corners, const Vec3& view_dir,
                                  double dead_zone = 1e-3) {
  if (gt_hand.size() != 21) throw std::invalid_argument("ord_relations expects 21 hand joints");
  OrdRelations rel;
  for (std::size_t i = 0; i < 21; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      const double d = (gt_hand[i] - gt_corners[j]).dot(view_dir);
      rel.sign[i][j] = std::abs(d) <= dead_zone ? std::int8_t{0} : (d > 0.0 ? std::int8_t{1} : std::int8_t{-1});
    }
  }
  return rel;
}

/// Penalizes each of the 21 x 8 joint/corner pairs whose predicted depth
/// ordering along view_dir contradicts the ground-truth relation, by the
/// magnitude of the projected distance.
inline double loss_ord(std::span<const Vec3> hand, const std::array<Vec3, 8>& corners,
                       const OrdRelations& gt_relations, const Vec3& view_dir) {
  if (hand.size() != 21) throw std::invalid_argument("loss_ord expects 21 hand joints");
  double sum = 0.0;
  for (std::size_t i = 0; i < 21; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      const std::int8_t want = gt_relations.sign[i][j];
      if (want == 0) continue;
      const double d = (hand[i] - corners[j]).dot(view_dir);
      const std::int8_t got = d > 0.0 ? std::int8_t{1} : (d < 0.0 ? std::int8_t{-1} : std::int8_t{0});
      if (got != want) sum += std::abs(d);
    }
  }
  return sum;
}

/// Valid object rotations for symmetry-aware evaluation. Always contains the
/// identity; generated sets carry per-element self-map residuals.
struct SymmetrySet {
  std::vector<Mat3> rotations;
  std::vector<double> residuals;       // symmetric Hausdorff self-map, meters
  std::vector<std::string> warnings;   // dropped / diverged elements

  static SymmetrySet identity_only() {
    SymmetrySet s;
    s.rotations.push_back(Mat3::Identity());
    s.residuals.push_back(0.0);
    return s;
  }
};

/// min over R in S of (1/8) sum ||exp(r_pred) c_i - exp(r_gt) R c_i||^2.
inline double loss_sym(const Vec3& r_pred, const Vec3& r_gt, const SymmetrySet& sym,
                       const std::array<Vec3, 8>& corners_canonical) {
  if (sym.rotations.empty()) throw std::invalid_argument("symmetry set must be nonempty");
  const Mat3 P = so3_exp(r_pred);
  const Mat3 G = so3_exp(r_gt);
  double best = std::numeric_limits<double>::infinity();
  for (const Mat3& R : sym.rotations) {
    const Mat3 GR = G * R;
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) {
      const Vec3& c = corners_canonical[static_cast<std::size_t>(i)];
      sum += (P * c - GR * c).squaredNorm();
    }
    best = std::min(best, sum / 8.0);
  }
  return best;
}

struct LossBundle {
  double loc = 0.0;
  double cor = 0.0;
  double ord = 0.0;
  double sym = 0.0;
  double total = 0.0;
};

/// total = loc + l1 * cor + l2 * ord + l3 * sym.
inline LossBundle loss_total(double loc, double cor, double ord, double sym, double lambda1,
                             double lambda2, double lambda3) {
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(lambda3))
    throw std::invalid_argument("loss weights must be finite");
  LossBundle b{loc, cor, ord, sym, 0.0};
  b.total = loc + lambda1 * cor + lambda2 * ord + lambda3 * sym;
  return b;
}

// ---------------------------------------------------------------------------
// Evaluation metrics.
// ---------------------------------------------------------------------------

/// Mean per-joint position error in the wrist-aligned frame: both sets are
/// translated so joint 0 sits at the origin, then mean Euclidean distance.
inline double mpjpe(std::span<const Vec3> pred_hand, std::span<const Vec3> gt_hand) {
  if (pred_hand.size() != 21 || gt_hand.size() != 21)
    throw std::invalid_argument("mpjpe expects 21 joints per side");
  const Vec3 pw = pred_hand[0], gw = gt_hand[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < 21; ++i) sum += ((pred_hand[i] - pw) - (gt_hand[i] - gw)).norm();
  return sum / 21.0;
}

/// Mean per-corner position error.
inline double mpcpe(const std::array<Vec3, 8>& pred_corners, const std::array<Vec3, 8>& gt_corners) {
  double sum = 0.0;
  for (int i = 0; i < 8; ++i) sum += (pred_corners[static_cast<std::size_t>(i)] - gt_corners[static_cast<std::size_t>(i)]).norm();
  return sum / 8.0;
}

/// Maximum symmetry-aware surface distance:
/// min over R in S of max over v of ||pred(v) - gt(R v)||.
inline double mssd(const RigidTransform& pred, const RigidTransform& gt, const SymmetrySet& sym,
                   std::span<const Vec3> vertices) {
  if (vertices.empty()) throw std::invalid_argument("mssd needs a nonempty vertex set");
  if (sym.rotations.empty()) throw std::invalid_argument("mssd needs a nonempty symmetry set");
  double best = std::numeric_limits<double>::infinity();
  for (const Mat3& R : sym.rotations) {
    double worst = 0.0;
    for (const Vec3& v : vertices) {
      worst = std::max(worst, (pred.apply(v) - gt.apply(R * v)).norm());
      if (worst >= best) break;  // cannot beat the running minimum
    }
    best = std::min(best, worst);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Symmetry-set generation: inertia alignment, axis/angle generators closed
// under composition, ICP refinement, self-map audit.
// ---------------------------------------------------------------------------

/// Transform placing the vertex centroid at the origin with the inertia
/// eigenvectors (point-mass inertia of the vertex cloud) along x/y/z,
/// eigenvalues descending; the longest extent lands on z. Sign convention:
/// the first two eigenvectors are flipped so their largest-magnitude
/// component is positive (ties broken by lowest index); the third completes
/// a right-handed frame.
inline RigidTransform principal_axis_align(const ObjectModel& object) {
  const auto& verts = object.vertices();
  if (verts.size() < 4) throw AlignmentError("need at least 4 vertices for axis alignment");
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : verts) centroid += v;
  centroid /= static_cast<double>(verts.size());

  Mat3 scatter = Mat3::Zero();
  for (const auto& v : verts) {
    const Vec3 r = v - centroid;
    scatter += r * r.transpose();
  }
  scatter /= static_cast<double>(verts.size());

  // The point-mass inertia tensor trace(C)*I - C shares eigenvectors with the
  // scatter matrix C, eigenvalues reversed: Eigen's ascending scatter order is
  // exactly descending inertia order (longest extent lands on z).
  Eigen::SelfAdjointEigenSolver<Mat3> solver(scatter);
  if (solver.info() != Eigen::Success) throw AlignmentError("inertia eigendecomposition failed");
  if (solver.eigenvalues()(0) < 1e-12 * scatter.trace())
    throw AlignmentError("vertex cloud is degenerate (coplanar or collinear)");

  Mat3 axes = solver.eigenvectors();
  for (int k = 0; k < 2; ++k) {
    Vec3 v = axes.col(k);
    int arg = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) axes.col(k) = -v;
  }
  axes.col(2) = axes.col(0).cross(axes.col(1));

  const Mat3 R = axes.transpose();
  return {R, -(R * centroid)};
}

/// Rotation-only ICP about the origin: nearest-neighbour correspondences plus
/// orthogonal Procrustes per iteration, until the correspondence cost stops
/// improving (< 1e-10) or max_iters runs out. Returns the best delta found;
/// the refined rotation is delta * r_def.
inline Mat3 icp_refine(std::span<const Vec3> vertices, const Mat3& r_def, int max_iters = 30) {
  if (vertices.size() < 3) throw std::invalid_argument("icp_refine needs at least 3 points");
  PointKdTree tree(std::vector<Vec3>(vertices.begin(), vertices.end()));

  std::vector<Vec3> source(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) source[i] = r_def * vertices[i];

  Mat3 delta = Mat3::Identity();
  Mat3 best_delta = delta;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    Mat3 h = Mat3::Zero();
    double cost = 0.0;
    for (const Vec3& x : source) {
      const Vec3 moved = delta * x;
      const Vec3& y = tree.point(tree.nearest(moved));
      cost += (moved - y).squaredNorm();
      h += x * y.transpose();
    }
    cost /= static_cast<double>(source.size());
    if (cost < best_cost - 1e-10) {
      best_cost = cost;
      best_delta = delta;
    } else {
      break;
    }
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    delta = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  // Evaluate the final delta too; the loop exits before scoring it.
  {
    double cost = 0.0;
    for (const Vec3& x : source) {
      const Vec3 moved = delta * x;
      cost += (moved - tree.point(tree.nearest(moved))).squaredNorm();
    }
    cost /= static_cast<double>(source.size());
    if (cost < best_cost) best_delta = delta;
  }
  return best_delta;
}

/// Entry of a symmetry table row: rotation axis (canonical x/y/z after
/// inertia alignment) and angle, or a full revolution.
struct SymmetryAxis {
  int axis = 2;          // 0=x, 1=y, 2=z
  bool revolution = false;
  double angle = kPi;    // radians; ignored when revolution
};

struct SymmetrySpec {
  std::string object_id;
  std::vector<SymmetryAxis> axes;
};

/// Parses the structured symmetry table: one object per line,
///   <object_id> <axes> <angles>
/// with comma-separated axes (x, y, z) and per-axis angles in degrees or
/// "inf" for a revolution. '#' starts a comment.
inline std::vector<SymmetrySpec> parse_symmetry_table(std::istream& in) {
  std::vector<SymmetrySpec> specs;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string id, axes_tok, angles_tok;
    if (!(ss >> id >> axes_tok >> angles_tok)) {
      if (!id.empty()) throw ConfigError("malformed symmetry table line: " + line);
      continue;
    }
    auto split = [](const std::string& s) {
      std::vector<std::string> parts;
      std::string part;
      std::istringstream p(s);
      while (std::getline(p, part, ',')) parts.push_back(part);
      return parts;
    };
    const auto axes = split(axes_tok);
    const auto angles = split(angles_tok);
    if (axes.size() != angles.size() || axes.empty())
      throw ConfigError("axis/angle count mismatch in symmetry table line: " + line);
    SymmetrySpec spec;
    spec.object_id = id;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      SymmetryAxis entry;
      if (axes[k] == "x")
        entry.axis = 0;
      else if (axes[k] == "y")
        entry.axis = 1;
      else if (axes[k] == "z")
        entry.axis = 2;
      else
        throw ConfigError("unknown symmetry axis '" + axes[k] + "'");
      if (angles[k] == "inf") {
        entry.revolution = true;
      } else {
        entry.angle = deg2rad(std::stod(angles[k]));
        if (!(entry.angle > 0.0) || std::fmod(kTwoPi, entry.angle) > 1e-9)
          throw ConfigError("symmetry angle must divide 360 degrees: " + angles[k]);
      }
      spec.axes.push_back(entry);
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace detail {

inline double symmetric_hausdorff(std::span<const Vec3> a, const PointKdTree& tree_a,
                                  std::span<const Vec3> b, const PointKdTree& tree_b) {
  double worst = 0.0;
  for (const Vec3& p : a) worst = std::max(worst, tree_b.nearest_distance(p));
  for (const Vec3& p : b) worst = std::max(worst, tree_a.nearest_distance(p));
  return worst;
}

/// Deterministic subsample: even stride, at most max_points.
inline std::vector<Vec3> subsample(const std::vector<Vec3>& points, std::size_t max_points) {
  if (points.size() <= max_points) return points;
  std::vector<Vec3> out;
  out.reserve(max_points);
  const double stride = static_cast<double>(points.size()) / static_cast<double>(max_points);
  for (std::size_t k = 0; k < max_points; ++k) out.push_back(points[static_cast<std::size_t>(static_cast<double>(k) * stride)]);
  return out;
}

}  // namespace detail

/// Appendix-style symmetry pipeline: align the object by its inertia axes,
/// build generator rotations from the spec (revolutions discretized into
/// revolution_steps equal angles), close the set under composition, refine
/// every element by rotation-only ICP against the aligned cloud, and drop
/// elements whose refined self-map residual exceeds 1e-3 x diameter.
/// The identity is always element 0.
inline SymmetrySet symmetry_set(const ObjectModel& object, const SymmetrySpec& spec,
                                int revolution_steps = 36, int icp_iters = 30) {
  if (revolution_steps < 2) throw std::invalid_argument("revolution_steps must be >= 2");
  for (const auto& entry : spec.axes) {
    if (entry.axis < 0 || entry.axis > 2) throw std::invalid_argument("symmetry axis out of range");
  }

  const RigidTransform align = principal_axis_align(object);
  std::vector<Vec3> aligned;
  aligned.reserve(object.vertices().size());
  for (const auto& v : object.vertices()) aligned.push_back(align.apply(v));
  const std::vector<Vec3> cloud = detail::subsample(aligned, 1500);
  const PointKdTree cloud_tree(cloud);
  const double tolerance = 1e-3 * object.diameter();

  // Generators.
  std::vector<Mat3> generators;
  for (const auto& entry : spec.axes) {
    Vec3 axis = Vec3::Zero();
    axis[entry.axis] = 1.0;
    const double angle = entry.revolution ? kTwoPi / revolution_steps : entry.angle;
    generators.push_back(rotate_about(axis, angle));
  }

  // Closure under composition (BFS over generator products).
  constexpr std::size_t kClosureCap = 512;
  std::vector<Mat3> closed = {Mat3::Identity()};
  std::deque<std::size_t> frontier = {0};
  auto known = [&](const Mat3& R) {
    for (const Mat3& seen : closed) {
      if (rotation_distance(seen, R) < 1e-6) return true;
    }
    return false;
  };
  while (!frontier.empty()) {
    const Mat3 base = closed[frontier.front()];
    frontier.pop_front();
    for (const Mat3& g : generators) {
      const Mat3 candidate = base * g;
      if (known(candidate)) continue;
      if (closed.size() >= kClosureCap)
        throw std::invalid_argument("symmetry closure exceeds " + std::to_string(kClosureCap) +
                                    " elements; check the spec");
      closed.push_back(candidate);
      frontier.push_back(closed.size() - 1);
    }
  }

  SymmetrySet out;
  out.rotations.push_back(Mat3::Identity());
  out.residuals.push_back(0.0);
  for (std::size_t i = 1; i < closed.size(); ++i) {
    const Mat3 refined = icp_refine(cloud, closed[i], icp_iters) * closed[i];
    std::vector<Vec3> mapped(cloud.size());
    for (std::size_t k = 0; k < cloud.size(); ++k) mapped[k] = refined * cloud[k];
    const PointKdTree mapped_tree(mapped);
    const double residual = detail::symmetric_hausdorff(mapped, mapped_tree, cloud, cloud_tree);
    if (residual > tolerance) {
      std::ostringstream warn;
      warn << "dropped symmetry element " << i << ": residual " << residual << " > tolerance "
           << tolerance;
      out.warnings.push_back(warn.str());
      continue;
    }
    bool duplicate = false;
    for (const Mat3& kept : out.rotations) {
      if (rotation_distance(kept, refined) < 1e-6) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      out.rotations.push_back(refined);
      out.residuals.push_back(residual);
    }
  }
  return out;
}

}  // namespace hovsyn
