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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hovsyn/error.hpp"
#include "hovsyn/geometry.hpp"
#include "hovsyn/hand_model.hpp"
#include "hovsyn/mesh.hpp"
#include "hovsyn/parallel.hpp"
#include "hovsyn/rng.hpp"
#include "hovsyn/spatial.hpp"

namespace hovsyn {

/// Candidate wrist placement on the dilated object surface.
struct WristSite {
  Vec3 position = Vec3::Zero();        // p_w, on the offset surface
  Vec3 approach = Vec3::Zero();        // unit (v_o - p_w) / ||v_o - p_w||
  Vec3 nearest_vertex = Vec3::Zero();  // v_o
};

struct ContactAssignment {
  int finger_id = 0;                  // 0 = thumb
  Vec3 fingertip_point = Vec3::Zero();  // p_f at pairing time
  Vec3 contact_vertex = Vec3::Zero();   // v_c
  int contact_vertex_id = -1;
  double min_radius = 0.0;            // r_c
};

struct GraspDiagnostics {
  double max_penetration = 0.0;                       // over all anchors
  std::array<double, kFingerCount> fingertip_distance{};  // tip to surface
  double fit_residual = 0.0;                          // final cost
  bool converged = false;
  int iterations = 0;
};

/// Accepted or in-flight interaction pose. The wrist rotation is stored as a
/// quaternion so persisted candidates round-trip exactly; the compact pose is
/// derived on demand.
struct GraspCandidate {
  std::string object_id;
  QuatPose wrist;
  std::array<FingerPose, kFingerCount> fingers{};
  std::vector<ContactAssignment> assignments;
  GraspDiagnostics diagnostics;

  HandPoseCompact pose() const {
    HandPoseCompact p;
    p.wrist = wrist.transform();
    p.fingers = fingers;
    return p;
  }
};

struct GraspForgeConfig {
  double offset = 0.08;          // wrist offset-surface distance, meters
  int n_sites = 64;
  double budget_factor = 3.0;    // attempt budget = ceil(factor * target)
  int pair_retries = 8;
  int max_iters = 200;
  double grad_tol = 1e-6;
  double w_rep = 10.0;           // repulsion weight
  double eps_contact = 0.002;    // fingertip-to-surface contact threshold
  double tau_pen = 0.002;        // max anchor penetration
  double residual_cap = 2e-4;    // discard sloppy local minima
  double coupling = kDefaultCoupling;
  JointLimits limits;
  double pregrasp_bend_mcp = deg2rad(20.0);
  double pregrasp_bend_pd = deg2rad(25.0);
  double pregrasp_thumb_splay = deg2rad(30.0);
  int threads = 1;
};

// ---------------------------------------------------------------------------
// Step 1: offset surface and pre-grasp.
// ---------------------------------------------------------------------------

/// Samples n_sites points on the Euclidean offset surface (distance `offset`
/// from the mesh), approximately uniform by area: uniform shell rejection
/// followed by projection onto the exact level set. Each site carries its
/// nearest mesh vertex and the approach direction.
inline std::vector<WristSite> offset_surface_sites(const ObjectModel& object, double offset,
                                                   int n_sites, Rng& rng) {
  if (offset <= 0.0) throw std::invalid_argument("offset must be > 0");
  if (n_sites < 1) throw std::invalid_argument("n_sites must be >= 1");

  Aabb box;
  for (const auto& v : object.vertices()) box.expand(v);
  const Vec3 lo = box.lo - Vec3::Constant(1.25 * offset);
  const Vec3 hi = box.hi + Vec3::Constant(1.25 * offset);

  PointKdTree vertex_tree(object.vertices());

  std::vector<WristSite> sites;
  sites.reserve(static_cast<std::size_t>(n_sites));
  const long max_attempts = 200000L * n_sites;
  long attempts = 0;
  while (static_cast<int>(sites.size()) < n_sites) {
    if (++attempts > max_attempts)
      throw MeshError("offset surface sampling failed on mesh '" + object.id() + "'");
    Vec3 x(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    auto hit = object.closest_point(x);
    if (std::abs(hit.distance - offset) > 0.3 * offset) continue;
    if (object.inside(x)) continue;
    // Project onto the level set; the nearest triangle may change, so iterate.
    bool placed = false;
    for (int it = 0; it < 10; ++it) {
      const Vec3 g = (x - hit.point) / hit.distance;
      x = hit.point + offset * g;
      hit = object.closest_point(x);
      if (std::abs(hit.distance - offset) < 1e-9) {
        placed = true;
        break;
      }
    }
    if (!placed || object.inside(x)) continue;

    WristSite site;
    site.position = x;
    site.nearest_vertex = object.vertices()[static_cast<std::size_t>(vertex_tree.nearest(x))];
    const Vec3 to_obj = site.nearest_vertex - x;
    const double norm = to_obj.norm();
    if (norm < 1e-12) continue;
    site.approach = to_obj / norm;
    sites.push_back(site);
  }
  return sites;
}

/// Prehensile template at the wrist site: palm normal along the approach
/// direction, thumb opposed, fingers half-curled.
inline HandPoseCompact pregrasp_pose(const WristSite& site, const GraspForgeConfig& config = {}) {
  // Hand frame: palm faces -z, so R * (0,0,-1) = approach.
  const Vec3 z_col = -site.approach;
  Vec3 hint(0, 0, 1);
  if (std::abs(z_col.dot(hint)) > 1.0 - 1e-6) hint = Vec3(0, 1, 0);
  const Vec3 x_col = hint.cross(z_col).normalized();
  const Vec3 y_col = z_col.cross(x_col);
  HandPoseCompact pose;
  pose.wrist.R.col(0) = x_col;
  pose.wrist.R.col(1) = y_col;
  pose.wrist.R.col(2) = z_col;
  pose.wrist.t = site.position;
  for (int f = 0; f < kFingerCount; ++f) {
    auto& fp = pose.fingers[static_cast<std::size_t>(f)];
    fp.splay = f == kThumb ? config.pregrasp_thumb_splay : 0.0;
    fp.bend_mcp = config.pregrasp_bend_mcp;
    fp.bend_pd = config.pregrasp_bend_pd;
  }
  return pose;
}

// ---------------------------------------------------------------------------
// Step 2: contact-feasible region and fingertip pairing.
// ---------------------------------------------------------------------------

/// Vertex indices within fingertip reach of the wrist site. reach_max is the
/// wrist-to-fingertip length of the longest finger at full extension.
inline std::vector<int> contact_feasible_region(const WristSite& site, const ObjectModel& object,
                                                const HandSkeleton& skeleton) {
  std::vector<int> region;
  const double reach_sq = skeleton.reach_max * skeleton.reach_max;
  const auto& verts = object.vertices();
  for (int i = 0; i < static_cast<int>(verts.size()); ++i) {
    if ((verts[static_cast<std::size_t>(i)] - site.position).squaredNorm() <= reach_sq) region.push_back(i);
  }
  if (region.empty())
    throw RegionError("no contact-feasible vertices for site on '" + object.id() + "'");
  return region;
}

/// The point a finger touches with: its pad-center surface anchor.
inline Vec3 fingertip_pad(const HandSkeleton& skeleton, const HandFrames& frames, int finger) {
  const int tip = skeleton.fingertip[static_cast<std::size_t>(finger)];
  return frames.position[static_cast<std::size_t>(tip)] +
         frames.rotation[static_cast<std::size_t>(tip)] * skeleton.anchors[static_cast<std::size_t>(finger)][1];
}

/// Distance from a fingertip to the surface, measured over its anchor set.
inline double fingertip_contact_distance(const HandSkeleton& skeleton, const HandFrames& frames,
                                         int finger, const ObjectModel& object) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& a : anchor_positions(skeleton, frames, finger))
    best = std::min(best, object.distance(a));
  return best;
}

/// Thumb plus 1-4 uniformly chosen other fingers; per finger a random minimal
/// reaching radius r_c, and the contact vertex minimizing distance to the
/// pre-grasp fingertip among vertices with ||v_c - p_w|| >= r_c.
inline std::vector<ContactAssignment> pair_fingertips(const WristSite& site,
                                                      const std::vector<int>& region,
                                                      const ObjectModel& object,
                                                      const HandSkeleton& skeleton, Rng& rng,
                                                      const GraspForgeConfig& config = {}) {
  if (region.empty()) throw std::invalid_argument("contact region must be nonempty");

  const HandPoseCompact pregrasp = pregrasp_pose(site, config);
  const HandFrames frames = detail::fk_frames(skeleton, expand_pose(pregrasp, config.coupling));

  const int n_others = 1 + static_cast<int>(rng.uniform_below(4));
  std::array<int, 4> pool = {1, 2, 3, 4};
  for (int i = 0; i < n_others; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(4 - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  std::vector<int> selected = {kThumb};
  selected.insert(selected.end(), pool.begin(), pool.begin() + n_others);
  std::sort(selected.begin() + 1, selected.end());

  const auto& verts = object.vertices();
  double max_dist = 0.0;
  for (int i : region) max_dist = std::max(max_dist, (verts[static_cast<std::size_t>(i)] - site.position).norm());

  std::vector<ContactAssignment> assignments;
  for (int finger : selected) {
    const Vec3 p_f = fingertip_pad(skeleton, frames, finger);
    std::optional<ContactAssignment> chosen;
    for (int attempt = 0; attempt < config.pair_retries && !chosen; ++attempt) {
      const double r_c = rng.uniform(0.0, max_dist);
      double best_sq = std::numeric_limits<double>::infinity();
      int best = -1;
      for (int i : region) {
        if ((verts[static_cast<std::size_t>(i)] - site.position).norm() < r_c) continue;
        const double d_sq = (verts[static_cast<std::size_t>(i)] - p_f).squaredNorm();
        if (d_sq < best_sq) {
          best_sq = d_sq;
          best = i;
        }
      }
      if (best >= 0) chosen = ContactAssignment{finger, p_f, verts[static_cast<std::size_t>(best)], best, r_c};
    }
    if (!chosen)
      throw PairingError("no contact vertex satisfies the reaching radius for finger " +
                         std::to_string(finger));
    assignments.push_back(*chosen);
  }
  return assignments;
}

// ---------------------------------------------------------------------------
// Step 3: contact-cost fitting over the 21 C-space DoFs.
// ---------------------------------------------------------------------------

namespace detail {

/// Optimization state: compact pose plus cached kinematics.
struct FitCost {
  const ObjectModel& object;
  const HandSkeleton& skeleton;
  const std::vector<ContactAssignment>& assignments;
  const GraspForgeConfig& config;

  double attraction(const HandFrames& frames) const {
    double e = 0.0;
    for (const auto& a : assignments) {
      const Vec3 pad = fingertip_pad(skeleton, frames, a.finger_id);
      e += (pad - a.contact_vertex).squaredNorm();
    }
    return e;
  }

  double repulsion_finger(const HandFrames& frames, int finger) const {
    double e = 0.0;
    for (const Vec3& p : anchor_positions(skeleton, frames, finger)) {
      const double pen = object.penetration(p);
      e += pen * pen;
    }
    return e;
  }

  double repulsion(const HandFrames& frames) const {
    double e = 0.0;
    for (int f = 0; f < kFingerCount; ++f) e += repulsion_finger(frames, f);
    return e;
  }

  double total(const HandFrames& frames) const {
    return attraction(frames) + config.w_rep * repulsion(frames);
  }
};

inline HandPoseCompact clamp_to_limits(HandPoseCompact pose, const JointLimits& limits) {
  for (int f = 0; f < kFingerCount; ++f) {
    auto& fp = pose.fingers[static_cast<std::size_t>(f)];
    fp.splay = limits.splay_interval(f).clamp(fp.splay);
    fp.bend_mcp = limits.bend_mcp.clamp(fp.bend_mcp);
    fp.bend_pd = limits.bend_other.clamp(fp.bend_pd);
  }
  return pose;
}

/// params: [dt(3), dw(3), dangles(15)] applied to a base pose.
inline HandPoseCompact apply_step(const HandPoseCompact& base, const double* step, double scale,
                                  const JointLimits& limits) {
  HandPoseCompact out = base;
  out.wrist.t += scale * Vec3(step[0], step[1], step[2]);
  const Vec3 w = scale * Vec3(step[3], step[4], step[5]);
  out.wrist.R = so3_exp(w) * base.wrist.R;
  for (int f = 0; f < kFingerCount; ++f) {
    auto& fp = out.fingers[static_cast<std::size_t>(f)];
    fp.splay += scale * step[6 + 3 * f];
    fp.bend_mcp += scale * step[7 + 3 * f];
    fp.bend_pd += scale * step[8 + 3 * f];
  }
  return clamp_to_limits(out, limits);
}

/// Analytic gradient of the attraction term. Revolute-joint rule:
/// d p / d theta = axis x (p - joint_position).
inline void attraction_gradient(const FitCost& cost, const HandPoseCompact& pose,
                                const HandFrames& frames, double* grad) {
  std::fill(grad, grad + 21, 0.0);
  const HandSkeleton& skel = cost.skeleton;
  for (const auto& a : cost.assignments) {
    const int f = a.finger_id;
    const Vec3 tip = fingertip_pad(skel, frames, f);  // rigid on the tip frame
    const Vec3 r = 2.0 * (tip - a.contact_vertex);

    // Wrist translation and rotation (left-multiplied increment).
    grad[0] += r.x();
    grad[1] += r.y();
    grad[2] += r.z();
    const Vec3 gw = (tip - pose.wrist.t).cross(r);
    grad[3] += gw.x();
    grad[4] += gw.y();
    grad[5] += gw.z();

    const int mcp = finger_joint(f, 0), pip = finger_joint(f, 1), dip = finger_joint(f, 2);
    const Mat3& triad = skel.tsb[static_cast<std::size_t>(articulated_index(f, 0))];
    const Mat3& R_w = frames.rotation[0];

    // Splay axis is fixed in the wrist frame; the mcp bend axis is rotated by
    // the splay; downstream bend axes follow their parent frames.
    const Vec3 splay_axis = R_w * triad.col(1);
    const Vec3 bend_mcp_axis =
        R_w * rotate_about(triad.col(1), pose.fingers[static_cast<std::size_t>(f)].splay) * triad.col(2);
    const Vec3 bend_pip_axis = frames.rotation[static_cast<std::size_t>(mcp)] * triad.col(2);
    const Vec3 bend_dip_axis = frames.rotation[static_cast<std::size_t>(pip)] * triad.col(2);

    const Vec3 from_mcp = tip - frames.position[static_cast<std::size_t>(mcp)];
    grad[6 + 3 * f] += r.dot(splay_axis.cross(from_mcp));
    grad[7 + 3 * f] += r.dot(bend_mcp_axis.cross(from_mcp));
    grad[8 + 3 * f] += r.dot(bend_pip_axis.cross(tip - frames.position[static_cast<std::size_t>(pip)]) +
                             cost.config.coupling *
                                 bend_dip_axis.cross(tip - frames.position[static_cast<std::size_t>(dip)]));
  }
}

/// Central finite differences of the repulsion term. Only fingers whose
/// anchors are within margin of the surface can contribute.
inline void repulsion_gradient_fd(const FitCost& cost, const HandPoseCompact& pose, double* grad) {
  std::fill(grad, grad + 21, 0.0);
  const double h = 1e-5;
  const double margin = 1e-3;

  std::array<bool, kFingerCount> active{};
  bool any_active = false;
  {
    const HandFrames frames = fk_frames(cost.skeleton, expand_pose(pose, cost.config.coupling));
    for (int f = 0; f < kFingerCount; ++f) {
      for (const Vec3& p : anchor_positions(cost.skeleton, frames, f)) {
        if (cost.object.signed_distance(p) < margin) {
          active[static_cast<std::size_t>(f)] = true;
          any_active = true;
          break;
        }
      }
    }
  }
  if (!any_active) return;

  auto rep_active = [&](const HandPoseCompact& p) {
    const HandFrames frames = fk_frames(cost.skeleton, expand_pose(p, cost.config.coupling));
    double e = 0.0;
    for (int f = 0; f < kFingerCount; ++f) {
      if (active[static_cast<std::size_t>(f)]) e += cost.repulsion_finger(frames, f);
    }
    return e;
  };
  auto rep_one = [&](const HandPoseCompact& p, int finger) {
    const HandFrames frames = fk_frames(cost.skeleton, expand_pose(p, cost.config.coupling));
    return cost.repulsion_finger(frames, finger);
  };

  double step[21] = {0};
  // Wrist DoFs affect every active finger.
  for (int k = 0; k < 6; ++k) {
    step[k] = 1.0;
    const double plus = rep_active(apply_step(pose, step, h, cost.config.limits));
    const double minus = rep_active(apply_step(pose, step, -h, cost.config.limits));
    step[k] = 0.0;
    grad[k] = (plus - minus) / (2.0 * h);
  }
  // Finger DoFs affect their own finger only.
  for (int f = 0; f < kFingerCount; ++f) {
    if (!active[static_cast<std::size_t>(f)]) continue;
    for (int k = 6 + 3 * f; k < 9 + 3 * f; ++k) {
      step[k] = 1.0;
      const double plus = rep_one(apply_step(pose, step, h, cost.config.limits), f);
      const double minus = rep_one(apply_step(pose, step, -h, cost.config.limits), f);
      step[k] = 0.0;
      grad[k] = (plus - minus) / (2.0 * h);
    }
  }
}

}  // namespace detail

/// Minimizes sum ||p_f - v_c||^2 + w_rep * sum max(0, -sdf(anchor))^2 by
/// projected gradient descent with backtracking over the 21 C-space DoFs.
/// Angles are clamped to limits at every step, so the result stays
/// protocol-valid. The candidate is flagged unconverged when max_iters runs
/// out while steps still improve.
inline GraspCandidate fit_grasp(const HandPoseCompact& init,
                                const std::vector<ContactAssignment>& assignments,
                                const ObjectModel& object, const HandSkeleton& skeleton,
                                const GraspForgeConfig& config = {}) {
  if (assignments.empty()) throw std::invalid_argument("assignments must be nonempty");

  detail::FitCost cost{object, skeleton, assignments, config};
  HandPoseCompact pose = detail::clamp_to_limits(init, config.limits);

  // Block preconditioner: angles and wrist rotation act through a ~0.1 m
  // lever, so their natural steps are ~100x the translation's.
  double precond[21];
  precond[0] = precond[1] = precond[2] = 0.5;
  for (int k = 3; k < 21; ++k) precond[k] = 50.0;

  auto eval = [&](const HandPoseCompact& p) {
    return cost.total(detail::fk_frames(skeleton, expand_pose(p, config.coupling)));
  };

  double energy = eval(pose);
  bool converged = false;
  int iterations = 0;
  double grad[21], grad_rep[21], direction[21];

  for (; iterations < config.max_iters; ++iterations) {
    const HandFrames frames = detail::fk_frames(skeleton, expand_pose(pose, config.coupling));
    detail::attraction_gradient(cost, pose, frames, grad);
    detail::repulsion_gradient_fd(cost, pose, grad_rep);
    double grad_norm_sq = 0.0, decrease = 0.0;
    for (int k = 0; k < 21; ++k) {
      grad[k] += config.w_rep * grad_rep[k];
      grad_norm_sq += grad[k] * grad[k];
      direction[k] = -precond[k] * grad[k];
      decrease += precond[k] * grad[k] * grad[k];
    }
    if (std::sqrt(grad_norm_sq) <= config.grad_tol) {
      converged = true;
      break;
    }

    double alpha = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const HandPoseCompact trial = detail::apply_step(pose, direction, alpha, config.limits);
      const double trial_energy = eval(trial);
      if (trial_energy <= energy - 1e-4 * alpha * decrease && trial_energy < energy) {
        pose = trial;
        energy = trial_energy;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) {
      // Projected stationary point: no descent step exists.
      converged = true;
      break;
    }
  }

  GraspCandidate candidate;
  candidate.object_id = object.id();
  candidate.wrist = QuatPose::from_transform(pose.wrist);
  candidate.fingers = pose.fingers;
  candidate.assignments = assignments;

  // Diagnostics are computed on the quaternion-reconstructed pose, the exact
  // geometry every later re-validation will see.
  const HandFrames frames =
      detail::fk_frames(skeleton, expand_pose(candidate.pose(), config.coupling));
  double max_pen = 0.0;
  for (int f = 0; f < kFingerCount; ++f) {
    for (const Vec3& p : anchor_positions(skeleton, frames, f)) {
      max_pen = std::max(max_pen, object.penetration(p));
    }
    candidate.diagnostics.fingertip_distance[static_cast<std::size_t>(f)] =
        fingertip_contact_distance(skeleton, frames, f, object);
  }
  candidate.diagnostics.max_penetration = max_pen;
  candidate.diagnostics.fit_residual = energy;
  candidate.diagnostics.converged = converged;
  candidate.diagnostics.iterations = iterations;
  return candidate;
}

// ---------------------------------------------------------------------------
// Validation and the full pipeline.
// ---------------------------------------------------------------------------

struct GraspValidation {
  bool accept = false;
  bool thumb_contact = false;
  int other_contacts = 0;
  double max_penetration = 0.0;
  PoseValidity pose;
  std::vector<std::string> reasons;
};

/// Accept iff the thumb and at least one other assigned fingertip touch the
/// surface (within eps_contact), no anchor penetrates deeper than tau_pen,
/// and the pose passes protocol validation. Everything is recomputed from
/// the stored pose; nothing is trusted from the fit diagnostics.
inline GraspValidation validate_grasp(const GraspCandidate& candidate, const ObjectModel& object,
                                      const HandSkeleton& skeleton, double eps_contact,
                                      double tau_pen, double coupling = kDefaultCoupling,
                                      const JointLimits& limits = {}) {
  GraspValidation result;
  const HandPoseExpanded expanded = expand_pose(candidate.pose(), coupling);
  result.pose = validate_pose(expanded, limits);
  if (!result.pose.ok()) result.reasons.push_back("pose-invalid");

  const HandFrames frames = detail::fk_frames(skeleton, expanded);
  for (const auto& a : candidate.assignments) {
    const bool contact =
        fingertip_contact_distance(skeleton, frames, a.finger_id, object) <= eps_contact;
    if (a.finger_id == kThumb) {
      result.thumb_contact = contact;
    } else if (contact) {
      ++result.other_contacts;
    }
  }
  if (!result.thumb_contact) result.reasons.push_back("no-thumb-contact");
  if (result.other_contacts < 1) result.reasons.push_back("no-finger-contact");

  for (int f = 0; f < kFingerCount; ++f) {
    for (const Vec3& p : anchor_positions(skeleton, frames, f)) {
      result.max_penetration = std::max(result.max_penetration, object.penetration(p));
    }
  }
  if (result.max_penetration > tau_pen) result.reasons.push_back("penetration");

  result.accept = result.reasons.empty();
  return result;
}

struct GenerationStats {
  long attempts = 0;
  long accepted = 0;
  std::map<std::string, long> rejections;
};

struct GenerationResult {
  std::vector<GraspCandidate> candidates;  // sorted by (residual, attempt)
  GenerationStats stats;
};

/// site -> pre-grasp -> pair -> fit -> validate, until target_count accepted
/// or the attempt budget is exhausted. Deterministic for a fixed seed and
/// independent of the thread count: every attempt derives its own stream and
/// early stop keeps the minimal accepted prefix in attempt order.
inline GenerationResult generate_poses(const ObjectModel& object, int target_count,
                                       const GraspForgeConfig& config, Rng& rng) {
  if (target_count < 1) throw std::invalid_argument("target_count must be >= 1");

  const HandSkeleton skeleton = build_skeleton();
  Rng site_rng = rng.derive("sites");
  const std::vector<WristSite> sites =
      offset_surface_sites(object, config.offset, config.n_sites, site_rng);

  std::vector<std::optional<std::vector<int>>> regions(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) {
    try {
      regions[s] = contact_feasible_region(sites[s], object, skeleton);
    } catch (const RegionError&) {
      regions[s] = std::nullopt;
    }
  }

  const long budget = static_cast<long>(std::ceil(config.budget_factor * target_count));
  const Rng attempt_base = rng.derive("attempt");

  struct AttemptOutcome {
    std::optional<GraspCandidate> accepted;
    std::string rejection;
  };

  GenerationResult result;
  std::vector<std::pair<long, GraspCandidate>> accepted;  // (attempt, candidate)

  const long chunk = std::max<long>(8, 4L * std::max(1, config.threads));
  long next_attempt = 0;
  while (next_attempt < budget && static_cast<long>(accepted.size()) < target_count) {
    const long begin = next_attempt;
    const long end = std::min(budget, begin + chunk);
    next_attempt = end;
    std::vector<AttemptOutcome> outcomes(static_cast<std::size_t>(end - begin));
    parallel_for(static_cast<std::size_t>(end - begin), config.threads, [&](std::size_t i) {
      const long attempt = begin + static_cast<long>(i);
      auto& out = outcomes[i];
      const std::size_t site_id = static_cast<std::size_t>(attempt) % sites.size();
      if (!regions[site_id]) {
        out.rejection = "region-error";
        return;
      }
      Rng attempt_rng = attempt_base.derive(static_cast<std::uint64_t>(attempt));
      try {
        const auto assignments = pair_fingertips(sites[site_id], *regions[site_id], object,
                                                 skeleton, attempt_rng, config);
        const HandPoseCompact init = pregrasp_pose(sites[site_id], config);
        GraspCandidate candidate = fit_grasp(init, assignments, object, skeleton, config);
        const GraspValidation validation = validate_grasp(
            candidate, object, skeleton, config.eps_contact, config.tau_pen, config.coupling,
            config.limits);
        if (!validation.accept) {
          out.rejection = validation.reasons.front();
          return;
        }
        if (candidate.diagnostics.fit_residual > config.residual_cap) {
          out.rejection = "high-residual";
          return;
        }
        out.accepted = std::move(candidate);
      } catch (const PairingError&) {
        out.rejection = "pairing-error";
      }
    });
    for (long a = begin; a < end && static_cast<long>(accepted.size()) < target_count; ++a) {
      auto& out = outcomes[static_cast<std::size_t>(a - begin)];
      result.stats.attempts = a + 1;
      if (out.accepted) {
        accepted.emplace_back(a, std::move(*out.accepted));
      } else {
        ++result.stats.rejections[out.rejection];
      }
    }
  }

  if (accepted.empty()) {
    std::string detail = "no grasp accepted on '" + object.id() + "' within budget; rejections:";
    for (const auto& [reason, count] : result.stats.rejections)
      detail += " " + reason + "=" + std::to_string(count);
    throw GenerationError(detail);
  }

  std::sort(accepted.begin(), accepted.end(), [](const auto& lhs, const auto& rhs) {
    if (lhs.second.diagnostics.fit_residual != rhs.second.diagnostics.fit_residual)
      return lhs.second.diagnostics.fit_residual < rhs.second.diagnostics.fit_residual;
    return lhs.first < rhs.first;
  });
  result.stats.accepted = static_cast<long>(accepted.size());
  result.candidates.reserve(accepted.size());
  for (auto& [attempt, candidate] : accepted) result.candidates.push_back(std::move(candidate));
  return result;
}

}  // namespace hovsyn
