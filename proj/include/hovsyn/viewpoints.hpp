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

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hovsyn/geometry.hpp"
#include "hovsyn/rng.hpp"

namespace hovsyn {

/// One camera direction on the view sphere, parameterized by elevation
/// u in [-1, 1] and azimuth phi in [0, 2pi), plus an in-plane roll.
struct ViewpointSample {
  double u = 0.0;
  double phi = 0.0;
  Vec3 direction = Vec3(1, 0, 0);
  double inplane = 0.0;
};

/// direction = (sqrt(1-u^2) cos(phi), sqrt(1-u^2) sin(phi), u).
inline Vec3 direction_from(double u, double phi) {
  if (!(u >= -1.0 && u <= 1.0)) throw std::invalid_argument("elevation parameter u outside [-1, 1]");
  const double s = std::sqrt(1.0 - u * u);
  return Vec3(s * std::cos(phi), s * std::sin(phi), u);
}

inline ViewpointSample make_viewpoint(double u, double phi, double inplane = 0.0) {
  return {u, phi, direction_from(u, phi), inplane};
}

/// n_u x n_phi grid: u at midpoints of equal subdivisions of [-1, 1] (keeps
/// the poles out), phi equispaced over [0, 2pi). Row-major in (u, phi).
inline std::vector<ViewpointSample> sphere_grid(int n_u, int n_phi) {
  if (n_u < 1 || n_phi < 1) throw std::invalid_argument("sphere_grid counts must be >= 1");
  std::vector<ViewpointSample> grid;
  grid.reserve(static_cast<std::size_t>(n_u) * static_cast<std::size_t>(n_phi));
  for (int i = 0; i < n_u; ++i) {
    const double u = -1.0 + (2.0 * i + 1.0) / n_u;
    for (int j = 0; j < n_phi; ++j) {
      const double phi = kTwoPi * j / n_phi;
      grid.push_back(make_viewpoint(u, phi));
    }
  }
  return grid;
}

/// u gets a clamped uniform offset, phi a wrapped one, and the in-plane roll
/// is redrawn uniformly over the full circle.
inline ViewpointSample disturb_viewpoint(const ViewpointSample& vp, double delta_u,
                                         double delta_phi, Rng& rng) {
  if (delta_u < 0.0 || delta_phi < 0.0) throw std::invalid_argument("viewpoint deltas must be >= 0");
  const double du = rng.uniform(-delta_u, delta_u);
  const double dphi = rng.uniform(-delta_phi, delta_phi);
  const double inplane = rng.uniform(0.0, kTwoPi);
  double u = std::clamp(vp.u + du, -1.0, 1.0);
  double phi = std::fmod(vp.phi + dphi, kTwoPi);
  if (phi < 0.0) phi += kTwoPi;
  return make_viewpoint(u, phi, inplane);
}

struct CameraIntrinsics {
  double fx = 245.0, fy = 245.0;
  double cx = 112.0, cy = 112.0;
  int width = 224, height = 224;
};

/// World-from-camera pose: camera center at target + radius * direction,
/// optical axis (+z, x right, y down) pointing at the target, roll from
/// vp.inplane. Near the poles the up-hint falls back to +y.
inline RigidTransform camera_extrinsics(const ViewpointSample& vp, double radius,
                                        const Vec3& target) {
  if (radius <= 0.0) throw std::invalid_argument("camera radius must be > 0");
  const Vec3 center = target + radius * vp.direction;
  const Vec3 forward = -vp.direction;  // optical axis, looks at target
  Vec3 up_hint(0, 0, 1);
  if (std::abs(vp.direction.z()) > 1.0 - 1e-6) up_hint = Vec3(0, 1, 0);
  const Vec3 x_cam = forward.cross(up_hint).normalized();
  const Vec3 y_cam = forward.cross(x_cam).normalized();
  Mat3 R;
  R.col(0) = x_cam;
  R.col(1) = y_cam;
  R.col(2) = forward;
  R = R * rotate_about(Vec3(0, 0, 1), vp.inplane);
  return {R, center};
}

}  // namespace hovsyn
