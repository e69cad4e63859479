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

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <numbers>

namespace hovsyn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Rigid transform x -> R*x + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  Vec3 operator*(const Vec3& x) const { return apply(x); }

  RigidTransform operator*(const RigidTransform& other) const {
    return {R * other.R, R * other.t + t};
  }

  RigidTransform inverse() const {
    Mat3 rt = R.transpose();
    return {rt, -(rt * t)};
  }

  static RigidTransform identity() { return {}; }
};

/// Rodrigues exponential: rotation vector (axis * angle) to matrix.
inline Mat3 so3_exp(const Vec3& r) {
  const double angle = r.norm();
  if (angle < 1e-14) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

/// Logarithm of a rotation matrix as a rotation vector.
inline Vec3 so3_log(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

inline Mat3 rotate_about(const Vec3& unit_axis, double angle) {
  return Eigen::AngleAxisd(angle, unit_axis).toRotationMatrix();
}

/// Angle of the relative rotation between two rotation matrices, in [0, pi].
inline double rotation_distance(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Rotation matrix -> unit quaternion with a deterministic sign convention:
/// w >= 0, and if w == 0 the first nonzero of (x, y, z) is positive.
inline Quat quat_from_matrix(const Mat3& R) {
  Quat q(R);
  q.normalize();
  bool flip = q.w() < 0.0;
  if (q.w() == 0.0) {
    if (q.x() != 0.0)
      flip = q.x() < 0.0;
    else if (q.y() != 0.0)
      flip = q.y() < 0.0;
    else
      flip = q.z() < 0.0;
  }
  if (flip) q.coeffs() = -q.coeffs();
  return q;
}

inline bool is_rotation(const Mat3& R, double tol = 1e-9) {
  return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(R.determinant() - 1.0) < tol;
}

/// Rigid transform with the rotation stored as a unit quaternion
/// (w, x, y, z). Quaternion-to-matrix conversion is not bit-stable, so
/// everything that gets serialized keeps the quaternion authoritative and
/// derives the matrix on demand.
struct QuatPose {
  std::array<double, 4> q{1.0, 0.0, 0.0, 0.0};
  Vec3 t = Vec3::Zero();

  static QuatPose from_transform(const RigidTransform& T) {
    const Quat quat = quat_from_matrix(T.R);
    return {{quat.w(), quat.x(), quat.y(), quat.z()}, T.t};
  }

  RigidTransform transform() const {
    Quat quat(q[0], q[1], q[2], q[3]);
    return {quat.normalized().toRotationMatrix(), t};
  }

  friend bool operator==(const QuatPose& a, const QuatPose& b) {
    return a.q == b.q && a.t.x() == b.t.x() && a.t.y() == b.t.y() && a.t.z() == b.t.z();
  }
};

}  // namespace hovsyn
