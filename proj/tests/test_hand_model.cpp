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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>

#include "hovsyn/hand_model.hpp"

using namespace hovsyn;

namespace {

HandPoseCompact random_pose(Rng& rng, const JointLimits& limits = {}) {
  HandPoseCompact pose;
  pose.wrist.R = rotate_about(
      Vec3(rng.normal(), rng.normal(), rng.normal()).normalized(), rng.uniform(0.0, kPi));
  pose.wrist.t = Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
  for (int f = 0; f < kFingerCount; ++f) {
    auto& fp = pose.fingers[static_cast<std::size_t>(f)];
    const Interval& splay = limits.splay_interval(f);
    fp.splay = rng.uniform(splay.lo, splay.hi);
    fp.bend_mcp = rng.uniform(limits.bend_mcp.lo, limits.bend_mcp.hi);
    fp.bend_pd = rng.uniform(limits.bend_other.lo, limits.bend_other.hi * 0.6);
  }
  return pose;
}

}  // namespace

TEST_CASE("canonical skeleton structure") {
  const HandSkeleton skel = build_skeleton();

  SECTION("tree rooted at the wrist, 4 joints per finger") {
    REQUIRE(skel.parent[0] == -1);
    for (int f = 0; f < kFingerCount; ++f) {
      REQUIRE(skel.parent[static_cast<std::size_t>(finger_joint(f, 0))] == 0);
      for (int link = 1; link < 4; ++link)
        REQUIRE(skel.parent[static_cast<std::size_t>(finger_joint(f, link))] == finger_joint(f, link) - 1);
    }
  }

  SECTION("tsb triads are orthonormal") {
    for (const Mat3& triad : skel.tsb) {
      for (int a = 0; a < 3; ++a) {
        REQUIRE(std::abs(triad.col(a).norm() - 1.0) < 1e-9);
        for (int b = a + 1; b < 3; ++b) REQUIRE(std::abs(triad.col(a).dot(triad.col(b))) < 1e-9);
      }
    }
  }

  SECTION("documented canonical middle-finger chain length") {
    REQUIRE(skel.chain_length(2) == Catch::Approx(kCanonicalMiddleChainLength).margin(1e-12));
    REQUIRE(skel.reach_max == Catch::Approx(kCanonicalMiddleChainLength).margin(1e-12));
  }
}

TEST_CASE("shape scaling of the skeleton") {
  const HandSkeleton canonical = build_skeleton();

  SECTION("multiplier 1.1 on all fingers") {
    ShapeParams shape;
    for (int f = 0; f < 5; ++f) shape.coefficients[static_cast<std::size_t>(f)] = 2.0;  // 1 + 0.05 * 2 = 1.1
    const HandSkeleton scaled = build_skeleton(shape);
    for (int f = 0; f < kFingerCount; ++f) {
      REQUIRE(scaled.chain_length(f) ==
              Catch::Approx(1.1 * canonical.chain_length(f)).margin(1e-9));
    }
  }

  SECTION("random shapes stay inside the clamp band") {
    Rng rng(17);
    for (int trial = 0; trial < 10000; ++trial) {
      ShapeParams shape;
      for (auto& c : shape.coefficients) c = rng.uniform(-40.0, 40.0);
      const HandSkeleton skel = build_skeleton(shape);
      for (int f = 0; f < kFingerCount; ++f) {
        const double ratio = skel.chain_length(f) / canonical.chain_length(f);
        REQUIRE(ratio >= 0.5 - 1e-12);
        REQUIRE(ratio <= 1.5 + 1e-12);
        for (int link = 0; link < 4; ++link)
          REQUIRE(skel.rest_offset[static_cast<std::size_t>(finger_joint(f, link))].norm() > 0.0);
      }
    }
  }

  SECTION("non-finite coefficients are rejected") {
    ShapeParams bad;
    bad.coefficients[3] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(build_skeleton(bad), std::invalid_argument);
  }
}

TEST_CASE("expand_pose applies the proximal-distal coupling") {
  HandPoseCompact pose;
  pose.fingers[1].bend_pd = 0.9;
  const HandPoseExpanded out = expand_pose(pose, 2.0 / 3.0);
  REQUIRE(out.joints[static_cast<std::size_t>(articulated_index(1, 1))].bend == 0.9);
  REQUIRE(out.joints[static_cast<std::size_t>(articulated_index(1, 2))].bend == Catch::Approx(0.6).epsilon(1e-15));

  SECTION("zero pose expands to zero") {
    const HandPoseExpanded zero = expand_pose(HandPoseCompact{});
    for (const auto& j : zero.joints) {
      REQUIRE(j.twist == 0.0);
      REQUIRE(j.splay == 0.0);
      REQUIRE(j.bend == 0.0);
    }
  }

  SECTION("expanded poses always pass protocol validation") {
    Rng rng(19);
    for (int trial = 0; trial < 10000; ++trial) {
      const HandPoseExpanded out = expand_pose(random_pose(rng));
      const PoseValidity report = validate_pose(out);
      REQUIRE(report.twist_free);
      REQUIRE(report.splay_localized);
      REQUIRE(report.ok());
    }
  }
}

TEST_CASE("validate_pose flags protocol violations") {
  REQUIRE(validate_pose(HandPoseExpanded{}).ok());

  SECTION("non-metacarpal splay violates protocol i") {
    HandPoseExpanded pose;
    pose.joints[static_cast<std::size_t>(articulated_index(2, 1))].splay = 0.1;
    const PoseValidity report = validate_pose(pose);
    REQUIRE_FALSE(report.splay_localized);
    REQUIRE_FALSE(report.ok());
  }

  SECTION("any twist violates protocol i") {
    HandPoseExpanded pose;
    pose.joints[static_cast<std::size_t>(articulated_index(0, 2))].twist = 1e-6;
    const PoseValidity report = validate_pose(pose);
    REQUIRE_FALSE(report.twist_free);
  }

  SECTION("joint limits are enforced") {
    HandPoseExpanded pose;
    pose.joints[static_cast<std::size_t>(articulated_index(1, 1))].bend = deg2rad(140.0);
    REQUIRE_FALSE(validate_pose(pose).within_limits);
  }
}

TEST_CASE("forward kinematics") {
  const HandSkeleton skel = build_skeleton();

  SECTION("zero pose reproduces the rest positions exactly") {
    const auto joints = forward_kinematics(skel, HandPoseExpanded{});
    for (int j = 0; j < kJointCount; ++j)
      REQUIRE(joints[static_cast<std::size_t>(j)] == skel.rest_position[static_cast<std::size_t>(j)]);
  }

  SECTION("pure wrist translation shifts every joint") {
    HandPoseExpanded pose;
    pose.wrist.t = Vec3(0.2, -0.1, 0.35);
    const auto joints = forward_kinematics(skel, pose);
    for (int j = 0; j < kJointCount; ++j) {
      REQUIRE((joints[static_cast<std::size_t>(j)] - (skel.rest_position[static_cast<std::size_t>(j)] + pose.wrist.t)).norm() <
              1e-12);
    }
  }

  SECTION("planar two-link oracle on the middle finger") {
    // pip bends 90 degrees; the remaining links rotate into -z.
    HandPoseExpanded pose;
    pose.joints[static_cast<std::size_t>(articulated_index(2, 1))].bend = kPi / 2;
    const auto joints = forward_kinematics(skel, pose);
    const double theta = kPi / 2;
    const Vec3 pip = skel.rest_position[static_cast<std::size_t>(finger_joint(2, 1))];
    const Vec3 expected_dip = pip + Vec3(0.028 * std::cos(theta), 0.0, -0.028 * std::sin(theta));
    const Vec3 expected_tip =
        expected_dip + Vec3(0.024 * std::cos(theta), 0.0, -0.024 * std::sin(theta));
    REQUIRE((joints[static_cast<std::size_t>(finger_joint(2, 2))] - expected_dip).norm() < 1e-9);
    REQUIRE((joints[static_cast<std::size_t>(finger_joint(2, 3))] - expected_tip).norm() < 1e-9);
  }

  SECTION("invalid poses are rejected") {
    HandPoseExpanded pose;
    pose.joints[0].twist = 0.2;
    REQUIRE_THROWS_AS(forward_kinematics(skel, pose), std::invalid_argument);
  }
}

TEST_CASE("kinematic invariants over random poses") {
  const HandSkeleton skel = build_skeleton();
  Rng rng(23);
  const int trials = 10000;

  SECTION("rigid equivariance") {
    for (int trial = 0; trial < trials; ++trial) {
      const HandPoseCompact pose = random_pose(rng);
      RigidTransform T;
      T.R = rotate_about(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized(),
                         rng.uniform(0.0, kPi));
      T.t = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));

      HandPoseCompact moved = pose;
      moved.wrist = T * pose.wrist;
      const auto direct = forward_kinematics(skel, expand_pose(moved));
      const auto base = forward_kinematics(skel, expand_pose(pose));
      for (int j = 0; j < kJointCount; ++j)
        REQUIRE((direct[static_cast<std::size_t>(j)] - T.apply(base[static_cast<std::size_t>(j)])).norm() < 1e-9);
    }
  }

  SECTION("bone lengths are preserved") {
    for (int trial = 0; trial < trials; ++trial) {
      const auto joints = forward_kinematics(skel, expand_pose(random_pose(rng)));
      for (int j = 1; j < kJointCount; ++j) {
        const double rest = skel.rest_offset[static_cast<std::size_t>(j)].norm();
        const double posed =
            (joints[static_cast<std::size_t>(j)] - joints[static_cast<std::size_t>(skel.parent[static_cast<std::size_t>(j)])]).norm();
        REQUIRE(std::abs(posed - rest) < 1e-9);
      }
    }
  }

  SECTION("finger independence is exact") {
    for (int trial = 0; trial < 2000; ++trial) {
      const HandPoseCompact pose = random_pose(rng);
      HandPoseCompact changed = pose;
      const int finger = static_cast<int>(rng.uniform_below(kFingerCount));
      changed.fingers[static_cast<std::size_t>(finger)].bend_pd = rng.uniform(0.0, 1.0);
      changed.fingers[static_cast<std::size_t>(finger)].splay =
          rng.uniform(JointLimits{}.splay_interval(finger).lo, JointLimits{}.splay_interval(finger).hi);
      const auto base = forward_kinematics(skel, expand_pose(pose));
      const auto moved = forward_kinematics(skel, expand_pose(changed));
      REQUIRE(moved[0] == base[0]);
      for (int f = 0; f < kFingerCount; ++f) {
        if (f == finger) continue;
        for (int link = 0; link < 4; ++link) {
          const int j = finger_joint(f, link);
          REQUIRE(moved[static_cast<std::size_t>(j)] == base[static_cast<std::size_t>(j)]);
        }
      }
    }
  }
}

TEST_CASE("disturb_pose adds clamped independent noise") {
  Rng rng(29);

  SECTION("zero sigmas reproduce the expansion exactly") {
    for (int trial = 0; trial < 200; ++trial) {
      const HandPoseCompact pose = random_pose(rng);
      const HandPoseExpanded expanded = expand_pose(pose);
      const HandPoseExpanded disturbed = disturb_pose(pose, 0.0, 0.0, rng);
      for (int k = 0; k < kArticulatedCount; ++k) {
        REQUIRE(disturbed.joints[static_cast<std::size_t>(k)].bend == expanded.joints[static_cast<std::size_t>(k)].bend);
        REQUIRE(disturbed.joints[static_cast<std::size_t>(k)].splay == expanded.joints[static_cast<std::size_t>(k)].splay);
        REQUIRE(disturbed.joints[static_cast<std::size_t>(k)].twist == 0.0);
      }
    }
  }

  SECTION("bend noise has the configured scale away from the clamp") {
    HandPoseCompact pose;
    for (auto& f : pose.fingers) {
      f.bend_mcp = deg2rad(30.0);
      f.bend_pd = deg2rad(45.0);
    }
    const double sigma = deg2rad(3.0);
    const int n = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const HandPoseExpanded out = disturb_pose(pose, sigma, deg2rad(1.5), rng);
      const double delta = out.joints[static_cast<std::size_t>(articulated_index(2, 1))].bend - deg2rad(45.0);
      sum += delta;
      sum_sq += delta * delta;
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sum_sq / n - mean * mean);
    REQUIRE(std::abs(stddev - sigma) < 0.05 * sigma);
  }

  SECTION("proximal and distal disturbances are independent") {
    HandPoseCompact pose;
    for (auto& f : pose.fingers) f.bend_pd = deg2rad(40.0);
    const int n = 10000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      const HandPoseExpanded out = disturb_pose(pose, deg2rad(3.0), 0.0, rng);
      const double x = out.joints[static_cast<std::size_t>(articulated_index(1, 1))].bend;
      const double y = out.joints[static_cast<std::size_t>(articulated_index(1, 2))].bend;
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double vx = sxx / n - (sx / n) * (sx / n);
    const double vy = syy / n - (sy / n) * (sy / n);
    REQUIRE(std::abs(cov / std::sqrt(vx * vy)) < 0.05);
  }

  SECTION("disturbed poses stay protocol-valid") {
    for (int trial = 0; trial < 2000; ++trial) {
      const HandPoseExpanded out = disturb_pose(random_pose(rng), deg2rad(3.0), deg2rad(1.5), rng);
      REQUIRE(validate_pose(out).ok());
    }
  }
}

TEST_CASE("sample_shape draws clamped gaussians") {
  SECTION("fixed seed reproduces the vector") {
    Rng a(31), b(31);
    const ShapeParams sa = sample_shape(a);
    const ShapeParams sb = sample_shape(b);
    REQUIRE(sa.coefficients == sb.coefficients);
  }

  SECTION("per-component mean vanishes over many draws") {
    Rng rng(37);
    std::array<double, 10> sums{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const ShapeParams s = sample_shape(rng);
      for (int k = 0; k < 10; ++k) {
        sums[static_cast<std::size_t>(k)] += s.coefficients[static_cast<std::size_t>(k)];
        REQUIRE(std::abs(s.coefficients[static_cast<std::size_t>(k)]) <= 2.0);
      }
    }
    for (double s : sums) REQUIRE(std::abs(s / n) < 0.02);
  }
}

TEST_CASE("skeleton text format round-trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hovsyn_skel_test";
  fs::create_directories(dir);
  const std::string path = (dir / "skeleton.txt").string();

  ShapeParams shape;
  shape.coefficients = {0.5, -0.3, 0.8, 0.0, 1.0, 0.2, 0.0, -0.7, 0.4, 0.1};
  const HandSkeleton skel = build_skeleton(shape);
  save_skeleton_text(skel, path);
  const HandSkeleton loaded = load_skeleton_text(path);

  for (int j = 0; j < kJointCount; ++j) {
    REQUIRE(loaded.parent[static_cast<std::size_t>(j)] == skel.parent[static_cast<std::size_t>(j)]);
    REQUIRE(loaded.rest_offset[static_cast<std::size_t>(j)] == skel.rest_offset[static_cast<std::size_t>(j)]);
  }
  for (int k = 0; k < kArticulatedCount; ++k)
    REQUIRE(loaded.tsb[static_cast<std::size_t>(k)] == skel.tsb[static_cast<std::size_t>(k)]);
  REQUIRE(loaded.reach_max == Catch::Approx(skel.reach_max).margin(1e-15));
}
