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
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hovsyn/error.hpp"
#include "hovsyn/geometry.hpp"
#include "hovsyn/rng.hpp"

namespace hovsyn {

// 21-joint skeleton: wrist (0) plus five 4-joint finger chains
// (mcp, pip, dip, tip), thumb first. Articulated joints are the 15
// mcp/pip/dip joints; tips carry no rotation.
//
// Hand frame at rest: +x distal (wrist toward fingers), +y radial (toward
// the thumb), +z dorsal (back of the hand). Right hand; the palm faces -z.

inline constexpr int kJointCount = 21;
inline constexpr int kFingerCount = 5;
inline constexpr int kArticulatedCount = 15;
inline constexpr int kAnchorsPerFinger = 6;
inline constexpr int kThumb = 0;

/// Default proximal-to-distal bend coupling: distal = (2/3) * proximal.
inline constexpr double kDefaultCoupling = 2.0 / 3.0;

/// Full extension wrist-to-fingertip length of the canonical middle finger,
/// the longest chain of the canonical skeleton.
inline constexpr double kCanonicalMiddleChainLength = 0.190;

constexpr int finger_joint(int finger, int link) { return 1 + 4 * finger + link; }
constexpr int articulated_index(int finger, int link) { return 3 * finger + link; }

struct Interval {
  double lo = 0.0, hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return std::clamp(v, lo, hi); }
};

/// Per-axis joint limits in radians. The thumb metacarpal splays through a
/// wider, opposition-shifted range than the other fingers.
struct JointLimits {
  Interval bend_mcp{deg2rad(-30.0), deg2rad(90.0)};
  Interval bend_other{deg2rad(-10.0), deg2rad(100.0)};
  Interval splay{deg2rad(-25.0), deg2rad(25.0)};
  Interval thumb_splay{deg2rad(-15.0), deg2rad(60.0)};

  const Interval& splay_interval(int finger) const {
    return finger == kThumb ? thumb_splay : splay;
  }
  const Interval& bend_interval(int link) const {
    return link == 0 ? bend_mcp : bend_other;
  }
};

/// 10 shape coefficients: the first five scale per-finger lengths, the last
/// five per-finger widths (anchor pad size).
struct ShapeParams {
  std::array<double, 10> coefficients{};

  static ShapeParams zero() { return {}; }
};

struct HandSkeleton {
  std::array<int, kJointCount> parent{};
  std::array<Vec3, kJointCount> rest_offset{};    // from parent, hand frame
  std::array<Vec3, kJointCount> rest_position{};  // from wrist, hand frame
  std::array<Mat3, kArticulatedCount> tsb{};      // columns: twist, splay, bend
  std::array<int, kFingerCount> fingertip{};
  // Hand-frame offsets from the rest tip position; rotated by the tip frame.
  std::array<std::array<Vec3, kAnchorsPerFinger>, kFingerCount> anchors{};
  double reach_max = 0.0;  // longest chain at full extension

  double chain_length(int finger) const {
    double len = 0.0;
    for (int link = 0; link < 4; ++link) len += rest_offset[static_cast<std::size_t>(finger_joint(finger, link))].norm();
    return len;
  }
};

struct FingerPose {
  double splay = 0.0;
  double bend_mcp = 0.0;
  double bend_pd = 0.0;  // drives the linked proximal-distal pair
};

/// 21-DoF pose: 6-DoF wrist + 3 angles per finger.
struct HandPoseCompact {
  RigidTransform wrist;
  std::array<FingerPose, kFingerCount> fingers{};
};

struct JointAngles {
  double twist = 0.0;
  double splay = 0.0;
  double bend = 0.0;
};

/// Per-joint pose over all 15 articulated joints, proximal and distal bends
/// stored independently. Able to represent protocol violations (nonzero
/// twist, off-metacarpal splay) so they can be detected.
struct HandPoseExpanded {
  RigidTransform wrist;
  std::array<JointAngles, kArticulatedCount> joints{};
};

struct PoseValidity {
  bool twist_free = true;        // no twist about the pointing direction
  bool splay_localized = true;   // splay only at metacarpals
  bool within_limits = true;
  std::vector<std::string> violations;

  bool ok() const { return twist_free && splay_localized && within_limits; }
};

namespace detail {

struct FingerSpec {
  Vec3 base;          // mcp rest position
  Vec3 dir;           // pointing direction, unit
  double seg[3];      // mcp->pip, pip->dip, dip->tip lengths
  Vec3 dorsal;        // back-of-finger hint for the tsb triad
};

inline const std::array<FingerSpec, kFingerCount>& canonical_fingers() {
  static const std::array<FingerSpec, kFingerCount> specs = [] {
    std::array<FingerSpec, kFingerCount> f{};
    f[0] = {{0.020, 0.028, -0.010}, Vec3(0.70, 0.66, -0.10).normalized(), {0.046, 0.032, 0.027},
            Vec3(0.0, 0.6, 0.8).normalized()};
    f[1] = {{0.088, 0.026, 0.0}, Vec3(0.99, 0.14, 0.0).normalized(), {0.042, 0.026, 0.023},
            Vec3(0, 0, 1)};
    f[2] = {{0.092, 0.000, 0.0}, Vec3(1.0, 0.0, 0.0), {0.046, 0.028, 0.024}, Vec3(0, 0, 1)};
    f[3] = {{0.086, -0.024, 0.0}, Vec3(0.99, -0.12, 0.0).normalized(), {0.042, 0.027, 0.024},
            Vec3(0, 0, 1)};
    f[4] = {{0.076, -0.046, 0.0}, Vec3(0.97, -0.24, 0.0).normalized(), {0.034, 0.021, 0.021},
            Vec3(0, 0, 1)};
    return f;
  }();
  return specs;
}

// Anchor offsets in (twist, splay, bend) components: tip point, pad center,
// and a 4-point pad ring. The pad faces the -splay (palmar) side.
struct AnchorTsb {
  double t, s, b;
};
inline constexpr std::array<AnchorTsb, kAnchorsPerFinger> kAnchorPattern = {{
    {0.006, -0.002, 0.0},
    {0.000, -0.006, 0.0},
    {0.003, -0.005, 0.0035},
    {0.003, -0.005, -0.0035},
    {-0.003, -0.005, 0.0035},
    {-0.003, -0.005, -0.0035},
}};

}  // namespace detail

/// Skeleton with rest offsets scaled by shape-derived per-finger multipliers.
/// Zero shape yields the canonical rest skeleton. Length/width scale is
/// 1 + 0.05 * coefficient, clamped to [0.5, 1.5].
inline HandSkeleton build_skeleton(const ShapeParams& shape = ShapeParams::zero()) {
  for (double c : shape.coefficients) {
    if (!std::isfinite(c)) throw std::invalid_argument("shape coefficients must be finite");
  }
  HandSkeleton skel;
  skel.parent[0] = -1;
  skel.rest_offset[0] = Vec3::Zero();
  skel.rest_position[0] = Vec3::Zero();

  const auto& fingers = detail::canonical_fingers();
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& spec = fingers[static_cast<std::size_t>(f)];
    const double len_scale = std::clamp(1.0 + 0.05 * shape.coefficients[static_cast<std::size_t>(f)], 0.5, 1.5);
    const double width_scale =
        std::clamp(1.0 + 0.05 * shape.coefficients[static_cast<std::size_t>(5 + f)], 0.5, 1.5);

    Vec3 pos = Vec3::Zero();
    for (int link = 0; link < 4; ++link) {
      const int j = finger_joint(f, link);
      skel.parent[static_cast<std::size_t>(j)] = link == 0 ? 0 : j - 1;
      const Vec3 offset =
          len_scale * (link == 0 ? spec.base : Vec3(spec.dir * spec.seg[link - 1]));
      skel.rest_offset[static_cast<std::size_t>(j)] = offset;
      pos += offset;
      skel.rest_position[static_cast<std::size_t>(j)] = pos;
    }
    skel.fingertip[static_cast<std::size_t>(f)] = finger_joint(f, 3);

    // One triad per articulated joint: twist along the bone, bend and splay
    // from the dorsal hint, orthonormal by construction.
    const Vec3 twist = spec.dir;
    const Vec3 bend = spec.dorsal.cross(twist).normalized();
    const Vec3 splay = twist.cross(bend);
    Mat3 triad;
    triad.col(0) = twist;
    triad.col(1) = splay;
    triad.col(2) = bend;
    for (int link = 0; link < 3; ++link) skel.tsb[static_cast<std::size_t>(articulated_index(f, link))] = triad;

    for (int a = 0; a < kAnchorsPerFinger; ++a) {
      const auto& p = detail::kAnchorPattern[static_cast<std::size_t>(a)];
      skel.anchors[static_cast<std::size_t>(f)][static_cast<std::size_t>(a)] =
          p.t * twist + width_scale * (p.s * splay + p.b * bend);
    }
  }
  skel.reach_max = 0.0;
  for (int f = 0; f < kFingerCount; ++f) skel.reach_max = std::max(skel.reach_max, skel.chain_length(f));
  return skel;
}

/// Proximal bend = bend_pd, distal = coupling * bend_pd; twist zero
/// everywhere, splay only at metacarpals.
inline HandPoseExpanded expand_pose(const HandPoseCompact& pose, double coupling = kDefaultCoupling) {
  HandPoseExpanded out;
  out.wrist = pose.wrist;
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& fp = pose.fingers[static_cast<std::size_t>(f)];
    out.joints[static_cast<std::size_t>(articulated_index(f, 0))] = {0.0, fp.splay, fp.bend_mcp};
    out.joints[static_cast<std::size_t>(articulated_index(f, 1))] = {0.0, 0.0, fp.bend_pd};
    out.joints[static_cast<std::size_t>(articulated_index(f, 2))] = {0.0, 0.0, coupling * fp.bend_pd};
  }
  return out;
}

/// Never throws; reports protocol and limit compliance.
inline PoseValidity validate_pose(const HandPoseExpanded& pose, const JointLimits& limits = {}) {
  PoseValidity report;
  auto flag = [&](bool& field, const std::string& msg) {
    field = false;
    report.violations.push_back(msg);
  };
  for (int f = 0; f < kFingerCount; ++f) {
    for (int link = 0; link < 3; ++link) {
      const auto& j = pose.joints[static_cast<std::size_t>(articulated_index(f, link))];
      const std::string tag = "finger " + std::to_string(f) + " link " + std::to_string(link);
      if (j.twist != 0.0) flag(report.twist_free, "twist at " + tag);
      if (link != 0 && j.splay != 0.0) flag(report.splay_localized, "non-metacarpal splay at " + tag);
      if (!limits.bend_interval(link).contains(j.bend)) flag(report.within_limits, "bend limit at " + tag);
      if (link == 0 && !limits.splay_interval(f).contains(j.splay))
        flag(report.within_limits, "splay limit at " + tag);
    }
  }
  return report;
}

struct HandFrames {
  std::array<Vec3, kJointCount> position{};
  std::array<Mat3, kJointCount> rotation{};
};

namespace detail {

/// Chain FK without validation; callers guarantee the pose shape.
inline HandFrames fk_frames(const HandSkeleton& skel, const HandPoseExpanded& pose) {
  HandFrames out;
  out.position[0] = pose.wrist.t;
  out.rotation[0] = pose.wrist.R;
  for (int f = 0; f < kFingerCount; ++f) {
    for (int link = 0; link < 4; ++link) {
      const int j = finger_joint(f, link);
      const int parent = skel.parent[static_cast<std::size_t>(j)];
      out.position[static_cast<std::size_t>(j)] =
          out.position[static_cast<std::size_t>(parent)] +
          out.rotation[static_cast<std::size_t>(parent)] * skel.rest_offset[static_cast<std::size_t>(j)];
      if (link < 3) {
        const auto& j_pose = pose.joints[static_cast<std::size_t>(articulated_index(f, link))];
        const Mat3& triad = skel.tsb[static_cast<std::size_t>(articulated_index(f, link))];
        Mat3 local = Mat3::Identity();
        if (j_pose.twist != 0.0) local = local * rotate_about(triad.col(0), j_pose.twist);
        if (j_pose.splay != 0.0) local = local * rotate_about(triad.col(1), j_pose.splay);
        if (j_pose.bend != 0.0) local = local * rotate_about(triad.col(2), j_pose.bend);
        out.rotation[static_cast<std::size_t>(j)] = out.rotation[static_cast<std::size_t>(parent)] * local;
      } else {
        out.rotation[static_cast<std::size_t>(j)] = out.rotation[static_cast<std::size_t>(parent)];
      }
    }
  }
  return out;
}

}  // namespace detail

inline HandFrames forward_frames(const HandSkeleton& skel, const HandPoseExpanded& pose,
                                 const JointLimits& limits = {}) {
  if (!validate_pose(pose, limits).ok()) throw std::invalid_argument("invalid hand pose");
  return detail::fk_frames(skel, pose);
}

/// 21 world-frame joint positions.
inline std::array<Vec3, kJointCount> forward_kinematics(const HandSkeleton& skel,
                                                        const HandPoseExpanded& pose,
                                                        const JointLimits& limits = {}) {
  return forward_frames(skel, pose, limits).position;
}

/// World positions of the 6 surface anchors of one fingertip.
inline std::array<Vec3, kAnchorsPerFinger> anchor_positions(const HandSkeleton& skel,
                                                            const HandFrames& frames, int finger) {
  std::array<Vec3, kAnchorsPerFinger> out;
  const int tip = skel.fingertip[static_cast<std::size_t>(finger)];
  for (int a = 0; a < kAnchorsPerFinger; ++a) {
    out[static_cast<std::size_t>(a)] = frames.position[static_cast<std::size_t>(tip)] +
                                       frames.rotation[static_cast<std::size_t>(tip)] *
                                           skel.anchors[static_cast<std::size_t>(finger)][static_cast<std::size_t>(a)];
  }
  return out;
}

/// Expands the pose, then perturbs the 15 bend angles with N(0, sigma_bend^2)
/// (proximal and distal independently) and the 5 metacarpal splays with
/// N(0, sigma_splay^2). Results are clamped to the limits, so protocols
/// still hold. Draw order: bends finger-major, then splays.
inline HandPoseExpanded disturb_pose(const HandPoseCompact& pose, double sigma_bend,
                                     double sigma_splay, Rng& rng,
                                     double coupling = kDefaultCoupling,
                                     const JointLimits& limits = {}) {
  if (sigma_bend < 0.0 || sigma_splay < 0.0) throw std::invalid_argument("sigmas must be >= 0");
  HandPoseExpanded out = expand_pose(pose, coupling);
  for (int f = 0; f < kFingerCount; ++f) {
    for (int link = 0; link < 3; ++link) {
      auto& j = out.joints[static_cast<std::size_t>(articulated_index(f, link))];
      j.bend = limits.bend_interval(link).clamp(j.bend + rng.normal(0.0, sigma_bend));
    }
  }
  for (int f = 0; f < kFingerCount; ++f) {
    auto& j = out.joints[static_cast<std::size_t>(articulated_index(f, 0))];
    j.splay = limits.splay_interval(f).clamp(j.splay + rng.normal(0.0, sigma_splay));
  }
  return out;
}

/// 10 i.i.d. draws from N(0, stddev^2), clamped to [-2, 2].
inline ShapeParams sample_shape(Rng& rng, double stddev = 0.5) {
  ShapeParams shape;
  for (auto& c : shape.coefficients) c = std::clamp(rng.normal(0.0, stddev), -2.0, 2.0);
  return shape;
}

// ---------------------------------------------------------------------------
// Optional structured-text skeleton format: one line per joint,
//   name parent ox oy oz [tx ty tz sx sy sz bx by bz]
// The triad is present for articulated joints only. Anchors keep the
// canonical pad pattern composed against the loaded triads.
// ---------------------------------------------------------------------------

inline void save_skeleton_text(const HandSkeleton& skel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write skeleton file: " + path);
  out.precision(17);
  static const char* names[4] = {"mcp", "pip", "dip", "tip"};
  out << "wrist -1 0 0 0\n";
  for (int f = 0; f < kFingerCount; ++f) {
    for (int link = 0; link < 4; ++link) {
      const int j = finger_joint(f, link);
      const Vec3& o = skel.rest_offset[static_cast<std::size_t>(j)];
      out << 'f' << f << '_' << names[link] << ' ' << skel.parent[static_cast<std::size_t>(j)] << ' ' << o.x() << ' '
          << o.y() << ' ' << o.z();
      if (link < 3) {
        const Mat3& m = skel.tsb[static_cast<std::size_t>(articulated_index(f, link))];
        for (int c = 0; c < 3; ++c)
          for (int r = 0; r < 3; ++r) out << ' ' << m(r, c);
      }
      out << '\n';
    }
  }
}

inline HandSkeleton load_skeleton_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skeleton file: " + path);
  HandSkeleton skel = build_skeleton();
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (row >= kJointCount) throw ConfigError("skeleton file has more than 21 joints");
    std::istringstream ss(line);
    std::string name;
    int parent;
    Vec3 o;
    if (!(ss >> name >> parent >> o.x() >> o.y() >> o.z()))
      throw ConfigError("malformed skeleton line: " + line);
    skel.parent[static_cast<std::size_t>(row)] = parent;
    skel.rest_offset[static_cast<std::size_t>(row)] = o;
    if (row > 0 && (row - 1) % 4 < 3) {
      Mat3 m;
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r)
          if (!(ss >> m(r, c))) throw ConfigError("missing tsb triad in line: " + line);
      skel.tsb[static_cast<std::size_t>(3 * ((row - 1) / 4) + (row - 1) % 4)] = m;
    }
    ++row;
  }
  if (row != kJointCount) throw ConfigError("skeleton file must list exactly 21 joints");
  // Rebuild derived tables.
  for (int j = 1; j < kJointCount; ++j) {
    skel.rest_position[static_cast<std::size_t>(j)] =
        skel.rest_position[static_cast<std::size_t>(skel.parent[static_cast<std::size_t>(j)])] + skel.rest_offset[static_cast<std::size_t>(j)];
  }
  for (int f = 0; f < kFingerCount; ++f) {
    const Mat3& triad = skel.tsb[static_cast<std::size_t>(articulated_index(f, 2))];
    for (int a = 0; a < kAnchorsPerFinger; ++a) {
      const auto& p = detail::kAnchorPattern[static_cast<std::size_t>(a)];
      skel.anchors[static_cast<std::size_t>(f)][static_cast<std::size_t>(a)] =
          p.t * triad.col(0) + p.s * triad.col(1) + p.b * triad.col(2);
    }
  }
  skel.reach_max = 0.0;
  for (int f = 0; f < kFingerCount; ++f) skel.reach_max = std::max(skel.reach_max, skel.chain_length(f));
  return skel;
}

}  // namespace hovsyn
