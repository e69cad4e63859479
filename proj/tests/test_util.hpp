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
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "hovsyn/geometry.hpp"
#include "hovsyn/mesh.hpp"

namespace hovsyn::test {

inline bool exact_eq(const Vec3& a, const Vec3& b) {
  return a.x() == b.x() && a.y() == b.y() && a.z() == b.z();
}

inline bool exact_eq(const Mat3& a, const Mat3& b) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (a(r, c) != b(r, c)) return false;
    }
  }
  return true;
}

/// Independent brute-force point-to-mesh distance: scans every triangle.
/// Deliberately bypasses the BVH so it can serve as its oracle.
inline double brute_force_distance(const ObjectModel& mesh, const Vec3& q) {
  double best_sq = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles()) {
    const Vec3 cp = closest_point_on_triangle(q, mesh.vertices()[static_cast<std::size_t>(t[0])],
                                              mesh.vertices()[static_cast<std::size_t>(t[1])],
                                              mesh.vertices()[static_cast<std::size_t>(t[2])]);
    best_sq = std::min(best_sq, (cp - q).squaredNorm());
  }
  return std::sqrt(best_sq);
}

/// Brute-force inside test via a single ray's crossing parity, counting over
/// every triangle.
inline bool brute_force_inside(const ObjectModel& mesh, const Vec3& q, const Vec3& dir) {
  int crossings = 0;
  for (const auto& t : mesh.triangles()) {
    double hit;
    if (ray_triangle(q, dir, mesh.vertices()[static_cast<std::size_t>(t[0])],
                     mesh.vertices()[static_cast<std::size_t>(t[1])],
                     mesh.vertices()[static_cast<std::size_t>(t[2])], hit) &&
        hit > 1e-12) {
      ++crossings;
    }
  }
  return crossings % 2 == 1;
}

inline double brute_force_penetration(const ObjectModel& mesh, const Vec3& q) {
  if (!brute_force_inside(mesh, q, Vec3(0.5773502691896258, 0.5773502691896258, 0.5773502691896258)))
    return 0.0;
  return brute_force_distance(mesh, q);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hovsyn_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace hovsyn::test
