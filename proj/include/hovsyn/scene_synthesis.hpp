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
#include <cstdint>
#include <span>

#include "hovsyn/ccv_space.hpp"
#include "hovsyn/error.hpp"
#include "hovsyn/geometry.hpp"
#include "hovsyn/grasp_forge.hpp"
#include "hovsyn/hand_model.hpp"
#include "hovsyn/mesh.hpp"
#include "hovsyn/rng.hpp"
#include "hovsyn/viewpoints.hpp"

namespace hovsyn {

struct SynthesisConfig {
  double sigma_bend = deg2rad(3.0);
  double sigma_splay = deg2rad(1.5);
  double delta_u = 0.05;
  double delta_phi = deg2rad(7.5);
  double shape_stddev = 0.5;
  double camera_radius = 0.6;
  CameraIntrinsics intrinsics;
  std::uint32_t background_pool = 1000;
  std::uint32_t texture_pool = 100;
  double penetration_threshold = 0.002;
  int mitigation_max_steps = 120;
  double mitigation_step = deg2rad(0.5);
  double coupling = kDefaultCoupling;
  JointLimits limits;
};

/// Fully specified synthetic sample minus image formation: disturbed hand
/// pose, shape, viewpoint camera, and opaque asset ids. Re-running synthesis
/// with the stored seed reproduces the descriptor bit-exactly.
struct SceneDescriptor {
  TripletIndex triplet;
  std::uint64_t seed = 0;
  QuatPose wrist;
  std::array<JointAngles, kArticulatedCount> joints{};
  ShapeParams shape;
  QuatPose object_transform;  // object canonical -> world
  QuatPose camera;            // world-from-camera
  CameraIntrinsics intrinsics;
  std::uint32_t background_id = 0;
  std::uint32_t texture_id = 0;

  HandPoseExpanded hand_pose() const {
    HandPoseExpanded pose;
    pose.wrist = wrist.transform();
    pose.joints = joints;
    return pose;
  }
};

inline bool operator==(const JointAngles& a, const JointAngles& b) {
  return a.twist == b.twist && a.splay == b.splay && a.bend == b.bend;
}

inline bool operator==(const CameraIntrinsics& a, const CameraIntrinsics& b) {
  return a.fx == b.fx && a.fy == b.fy && a.cx == b.cx && a.cy == b.cy && a.width == b.width &&
         a.height == b.height;
}

inline bool operator==(const SceneDescriptor& a, const SceneDescriptor& b) {
  return a.triplet == b.triplet && a.seed == b.seed && a.wrist == b.wrist && a.joints == b.joints &&
         a.shape.coefficients == b.shape.coefficients && a.object_transform == b.object_transform &&
         a.camera == b.camera && a.intrinsics == b.intrinsics &&
         a.background_id == b.background_id && a.texture_id == b.texture_id;
}

/// Resolves inter-penetration by uncurling: each step reduces the bend
/// angles of every penetrating finger by mitigation_step, until all anchors
/// are outside or max_steps is reached. Non-penetrating fingers are never
/// touched, and a finger whose penetration would grow is reverted and frozen.
inline HandPoseExpanded mitigate_penetration(const HandPoseExpanded& pose, const ObjectModel& object,
                                             const HandSkeleton& skeleton, int max_steps,
                                             double step = deg2rad(0.5),
                                             const JointLimits& limits = {}) {
  HandPoseExpanded current = pose;
  std::array<bool, kFingerCount> frozen{};

  auto finger_penetration = [&](const HandPoseExpanded& p, int finger) {
    const HandFrames frames = detail::fk_frames(skeleton, p);
    double pen = 0.0;
    for (const Vec3& a : anchor_positions(skeleton, frames, finger))
      pen = std::max(pen, object.penetration(a));
    return pen;
  };

  std::array<double, kFingerCount> pen{};
  for (int f = 0; f < kFingerCount; ++f) pen[static_cast<std::size_t>(f)] = finger_penetration(current, f);

  for (int s = 0; s < max_steps; ++s) {
    bool any = false;
    for (int f = 0; f < kFingerCount; ++f) {
      if (frozen[static_cast<std::size_t>(f)] || pen[static_cast<std::size_t>(f)] <= 0.0) continue;
      any = true;
      HandPoseExpanded trial = current;
      for (int link = 0; link < 3; ++link) {
        auto& j = trial.joints[static_cast<std::size_t>(articulated_index(f, link))];
        j.bend = limits.bend_interval(link).clamp(j.bend - step);
      }
      const double trial_pen = finger_penetration(trial, f);
      if (trial_pen > pen[static_cast<std::size_t>(f)]) {
        frozen[static_cast<std::size_t>(f)] = true;  // uncurling makes it worse here; stop touching it
        continue;
      }
      for (int link = 0; link < 3; ++link) {
        current.joints[static_cast<std::size_t>(articulated_index(f, link))] =
            trial.joints[static_cast<std::size_t>(articulated_index(f, link))];
      }
      pen[static_cast<std::size_t>(f)] = trial_pen;
    }
    if (!any) break;
  }
  return current;
}

/// Synthesis of one triplet with an explicit item seed; the stored seed
/// reproduces the descriptor bit-exactly. Draw order: hand disturbance,
/// shape, viewpoint disturbance, background, texture.
inline SceneDescriptor synthesize_with_seed(const TripletIndex& triplet, const CCVSpace& space,
                                            std::span<const ObjectModel> objects,
                                            const SynthesisConfig& config, std::uint64_t item_seed) {
  if (!space.dims().contains(triplet)) throw std::invalid_argument("triplet outside the space");
  if (objects.size() != space.dims().n_objects)
    throw std::invalid_argument("object registry size must match the space");

  const ObjectModel& object = objects[triplet.object_id];
  const GraspCandidate& grasp = space.grasp(triplet.object_id, triplet.pose_id);
  Rng rng(item_seed);

  HandPoseExpanded pose =
      disturb_pose(grasp.pose(), config.sigma_bend, config.sigma_splay, rng, config.coupling,
                   config.limits);
  const ShapeParams shape = sample_shape(rng, config.shape_stddev);
  const HandSkeleton skeleton = build_skeleton(shape);

  auto max_penetration = [&](const HandPoseExpanded& p) {
    const HandFrames frames = detail::fk_frames(skeleton, p);
    double pen = 0.0;
    for (int f = 0; f < kFingerCount; ++f) {
      for (const Vec3& a : anchor_positions(skeleton, frames, f))
        pen = std::max(pen, object.penetration(a));
    }
    return pen;
  };

  if (max_penetration(pose) > config.penetration_threshold) {
    pose = mitigate_penetration(pose, object, skeleton, config.mitigation_max_steps,
                                config.mitigation_step, config.limits);
    const double residual = max_penetration(pose);
    if (residual > config.penetration_threshold)
      throw SynthError("penetration " + std::to_string(residual) +
                       " m above threshold after mitigation");
  }

  const ViewpointSample vp =
      disturb_viewpoint(space.viewpoint(triplet.viewpoint_id), config.delta_u, config.delta_phi, rng);

  SceneDescriptor descriptor;
  descriptor.triplet = triplet;
  descriptor.seed = item_seed;
  descriptor.wrist = QuatPose::from_transform(pose.wrist);
  descriptor.joints = pose.joints;
  descriptor.shape = shape;
  descriptor.object_transform = QuatPose{};  // object stays at canonical pose
  descriptor.camera =
      QuatPose::from_transform(camera_extrinsics(vp, config.camera_radius, object.centroid()));
  descriptor.intrinsics = config.intrinsics;
  descriptor.background_id = static_cast<std::uint32_t>(rng.uniform_below(config.background_pool));
  descriptor.texture_id = static_cast<std::uint32_t>(rng.uniform_below(config.texture_pool));
  return descriptor;
}

/// Per-item seed derivation: hash(master_seed, flat triplet index). Batch
/// synthesis parallelizes per triplet without changing results.
inline SceneDescriptor synthesize(const TripletIndex& triplet, const CCVSpace& space,
                                  std::span<const ObjectModel> objects,
                                  const SynthesisConfig& config, std::uint64_t master_seed) {
  const std::uint64_t item_seed = mix_seed(master_seed, space.dims().flat(triplet));
  return synthesize_with_seed(triplet, space, objects, config, item_seed);
}

}  // namespace hovsyn
