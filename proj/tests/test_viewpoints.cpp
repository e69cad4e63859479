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

#include "hovsyn/viewpoints.hpp"

using namespace hovsyn;

TEST_CASE("direction_from matches the sphere parameterization") {
  REQUIRE(direction_from(1.0, 0.3) == Vec3(0, 0, 1));
  REQUIRE(direction_from(1.0, 2.9) == Vec3(0, 0, 1));
  REQUIRE(direction_from(0.0, 0.0) == Vec3(1, 0, 0));

  const Vec3 d = direction_from(0.5, kPi / 2);
  REQUIRE(d.x() == Catch::Approx(0.0).margin(1e-6));
  REQUIRE(d.y() == Catch::Approx(0.8660254).margin(1e-6));
  REQUIRE(d.z() == Catch::Approx(0.5).margin(1e-6));

  REQUIRE_THROWS_AS(direction_from(1.0001, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(direction_from(-1.0001, 0.0), std::invalid_argument);

  SECTION("unit norm everywhere") {
    Rng rng(77);
    for (int i = 0; i < 10000; ++i) {
      const Vec3 v = direction_from(rng.uniform(-1.0, 1.0), rng.uniform(0.0, kTwoPi));
      REQUIRE(std::abs(v.norm() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sphere_grid spans the sphere") {
  const auto grid = sphere_grid(12, 24);
  REQUIRE(grid.size() == 288);

  SECTION("directions are pairwise distinct") {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t j = i + 1; j < grid.size(); ++j) {
        const double cosang = grid[i].direction.dot(grid[j].direction);
        REQUIRE(std::acos(std::clamp(cosang, -1.0, 1.0)) > deg2rad(1.0));
      }
    }
  }

  SECTION("azimuthal symmetry cancels x and y") {
    Vec3 mean = Vec3::Zero();
    for (const auto& vp : grid) mean += vp.direction;
    mean /= static_cast<double>(grid.size());
    REQUIRE(std::abs(mean.x()) < 1e-9);
    REQUIRE(std::abs(mean.y()) < 1e-9);
  }

  SECTION("single cell sits at the u midpoint") {
    const auto single = sphere_grid(1, 1);
    REQUIRE(single.size() == 1);
    REQUIRE(single[0].u == 0.0);
    REQUIRE(single[0].phi == 0.0);
    REQUIRE(single[0].direction == Vec3(1, 0, 0));
  }
}

TEST_CASE("disturb_viewpoint clamps, wraps, and rolls") {
  Rng rng(5);
  const ViewpointSample vp = make_viewpoint(0.4, 1.2);

  SECTION("zero deltas leave the direction identical") {
    for (int i = 0; i < 100; ++i) {
      const ViewpointSample out = disturb_viewpoint(vp, 0.0, 0.0, rng);
      REQUIRE(out.direction == vp.direction);
      REQUIRE(out.u == vp.u);
      REQUIRE(out.phi == vp.phi);
      REQUIRE(out.inplane >= 0.0);
      REQUIRE(out.inplane < kTwoPi);
    }
  }

  SECTION("u stays clamped near the pole") {
    const ViewpointSample near_pole = make_viewpoint(0.99, 0.0);
    for (int i = 0; i < 10000; ++i) {
      const ViewpointSample out = disturb_viewpoint(near_pole, 0.05, deg2rad(7.5), rng);
      REQUIRE(out.u <= 1.0);
      REQUIRE(std::abs(out.direction.norm() - 1.0) < 1e-12);
    }
  }

  SECTION("angular deviation stays below the box bound") {
    const ViewpointSample base = make_viewpoint(0.5, 1.0);
    const double du = 0.05, dphi = deg2rad(7.5);
    // Grid-search oracle over the disturbance box.
    double bound = 0.0;
    for (int i = -40; i <= 40; ++i) {
      for (int j = -40; j <= 40; ++j) {
        const double u = std::clamp(base.u + du * i / 40.0, -1.0, 1.0);
        const double phi = base.phi + dphi * j / 40.0;
        const double cosang = direction_from(u, phi).dot(base.direction);
        bound = std::max(bound, std::acos(std::clamp(cosang, -1.0, 1.0)));
      }
    }
    for (int i = 0; i < 10000; ++i) {
      const ViewpointSample out = disturb_viewpoint(base, du, dphi, rng);
      const double cosang = out.direction.dot(base.direction);
      REQUIRE(std::acos(std::clamp(cosang, -1.0, 1.0)) <= bound + 1e-12);
    }
  }

  SECTION("negative deltas are rejected") {
    REQUIRE_THROWS_AS(disturb_viewpoint(vp, -0.01, 0.0, rng), std::invalid_argument);
  }
}

TEST_CASE("uniform (u, phi) sampling is area-uniform on the sphere") {
  // 100 equal-area bins: 10 equal u slices x 10 equal phi slices.
  Rng rng(424242);
  std::array<int, 100> counts{};
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, kTwoPi);
    int ui = static_cast<int>((u + 1.0) / 0.2);
    int pi_bin = static_cast<int>(phi / (kTwoPi / 10.0));
    ui = std::clamp(ui, 0, 9);
    pi_bin = std::clamp(pi_bin, 0, 9);
    ++counts[static_cast<std::size_t>(10 * ui + pi_bin)];
  }
  const double expected = n / 100.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  REQUIRE(chi2 < 148.2304);  // chi-square df=99 upper tail at p = 0.001
}

TEST_CASE("camera_extrinsics looks at the target") {
  SECTION("top-down pose") {
    const ViewpointSample vp = make_viewpoint(1.0, 0.0);
    const RigidTransform cam = camera_extrinsics(vp, 0.5, Vec3::Zero());
    REQUIRE(cam.t == Vec3(0, 0, 0.5));
    REQUIRE((cam.R.col(2) - Vec3(0, 0, -1)).norm() < 1e-12);
  }

  SECTION("rotations are rigid for random viewpoints") {
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
      const ViewpointSample vp =
          make_viewpoint(rng.uniform(-1.0, 1.0), rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi));
      // Center - target is exactly parallel to the direction when the target
      // is the origin; a nonzero target reintroduces rounding in t - target.
      const RigidTransform at_origin = camera_extrinsics(vp, 0.6, Vec3::Zero());
      REQUIRE(at_origin.t.cross(vp.direction).norm() == 0.0);
      const RigidTransform cam = camera_extrinsics(vp, 0.6, Vec3(0.1, -0.2, 0.05));
      REQUIRE(is_rotation(cam.R, 1e-9));
      REQUIRE((cam.t - Vec3(0.1, -0.2, 0.05)).cross(vp.direction).norm() < 1e-12);
    }
  }

  SECTION("in-plane roll differs by a rotation about the optical axis") {
    const ViewpointSample a = make_viewpoint(0.3, 0.7, 0.0);
    const ViewpointSample b = make_viewpoint(0.3, 0.7, kPi);
    const RigidTransform ca = camera_extrinsics(a, 0.6, Vec3::Zero());
    const RigidTransform cb = camera_extrinsics(b, 0.6, Vec3::Zero());
    REQUIRE(ca.t == cb.t);
    const Mat3 expected = ca.R * rotate_about(Vec3(0, 0, 1), kPi);
    REQUIRE((cb.R - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("invalid radius") {
    REQUIRE_THROWS_AS(camera_extrinsics(make_viewpoint(0, 0), 0.0, Vec3::Zero()),
                      std::invalid_argument);
  }
}
