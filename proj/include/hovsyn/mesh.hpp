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
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hovsyn/error.hpp"
#include "hovsyn/geometry.hpp"
#include "hovsyn/spatial.hpp"

namespace hovsyn {

/// Triangle mesh with the derived quantities the pipeline needs: vertex
/// centroid, the 8 tightest axis-aligned bounding-box corners in canonical
/// frame, and accelerated distance / inside queries.
///
/// Meshes are assumed closed enough for ray-parity inside tests; the query
/// cross-checks three ray directions and majority-votes.
class ObjectModel {
 public:
  ObjectModel(std::string id, std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles)
      : data_(std::make_unique<MeshData>(
            MeshData{std::move(id), std::move(vertices), std::move(triangles)})) {
    if (data_->vertices.empty() || data_->triangles.empty())
      throw MeshError("mesh '" + data_->id + "' is empty");
    for (const auto& t : data_->triangles) {
      for (int k : t) {
        if (k < 0 || k >= static_cast<int>(data_->vertices.size()))
          throw MeshError("mesh '" + data_->id + "' has out-of-range triangle index");
      }
    }
    centroid_ = Vec3::Zero();
    Aabb box;
    for (const auto& v : data_->vertices) {
      centroid_ += v;
      box.expand(v);
    }
    centroid_ /= static_cast<double>(data_->vertices.size());
    for (int i = 0; i < 8; ++i) {
      corners_[static_cast<std::size_t>(i)] = Vec3((i & 1) ? box.hi.x() : box.lo.x(),
                                                   (i & 2) ? box.hi.y() : box.lo.y(),
                                                   (i & 4) ? box.hi.z() : box.lo.z());
    }
    diameter_ = (box.hi - box.lo).norm();
    // The mesh data sits behind a stable allocation, so the tree's pointers
    // survive moves of the ObjectModel itself.
    bvh_ = std::make_unique<TriangleBvh>(&data_->vertices, &data_->triangles);
  }

  ObjectModel(const ObjectModel& other)
      : ObjectModel(other.data_->id, other.data_->vertices, other.data_->triangles) {}
  ObjectModel& operator=(const ObjectModel&) = delete;
  ObjectModel(ObjectModel&&) = default;
  ObjectModel& operator=(ObjectModel&&) = default;

  const std::string& id() const { return data_->id; }
  const std::vector<Vec3>& vertices() const { return data_->vertices; }
  const std::vector<std::array<int, 3>>& triangles() const { return data_->triangles; }
  const Vec3& centroid() const { return centroid_; }
  const std::array<Vec3, 8>& corners() const { return corners_; }
  double diameter() const { return diameter_; }

  TriangleBvh::ClosestHit closest_point(const Vec3& q) const { return bvh_->closest_point(q); }

  double distance(const Vec3& q) const { return bvh_->closest_point(q).distance; }

  /// Ray-parity inside test, majority vote over three fixed directions.
  bool inside(const Vec3& q) const {
    static const std::array<Vec3, 3> dirs = {
        Vec3(0.5773502691896258, 0.5773502691896258, 0.5773502691896258).normalized(),
        Vec3(-0.2672612419124244, 0.8017837257372732, 0.5345224838248488).normalized(),
        Vec3(0.8320502943378437, -0.5547001962252291, 0.0137254901960784).normalized()};
    int votes = 0;
    for (const auto& d : dirs) {
      if (bvh_->count_crossings(q, d) % 2 == 1) ++votes;
    }
    return votes >= 2;
  }

  /// Signed distance: negative inside, positive outside.
  double signed_distance(const Vec3& q) const {
    const double d = distance(q);
    return inside(q) ? -d : d;
  }

  /// Penetration depth: how far q sits inside the surface (0 when outside).
  double penetration(const Vec3& q) const { return std::max(0.0, -signed_distance(q)); }

 private:
  struct MeshData {
    std::string id;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
  };

  std::unique_ptr<MeshData> data_;
  Vec3 centroid_ = Vec3::Zero();
  std::array<Vec3, 8> corners_;
  double diameter_ = 0.0;
  std::unique_ptr<TriangleBvh> bvh_;
};

// ---------------------------------------------------------------------------
// Primitive builders (lat/long sphere, subdivided box, capped cylinder).
// Vertex density matters here: mesh vertices double as contact candidates.
// ---------------------------------------------------------------------------

inline ObjectModel make_sphere(const std::string& id, double radius, int n_lat = 24, int n_lon = 48) {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  verts.emplace_back(0, 0, radius);   // north pole
  for (int i = 1; i < n_lat; ++i) {
    const double theta = kPi * i / n_lat;
    for (int j = 0; j < n_lon; ++j) {
      const double phi = kTwoPi * j / n_lon;
      verts.emplace_back(radius * std::sin(theta) * std::cos(phi),
                         radius * std::sin(theta) * std::sin(phi), radius * std::cos(theta));
    }
  }
  verts.emplace_back(0, 0, -radius);  // south pole
  const int south = static_cast<int>(verts.size()) - 1;
  auto ring = [&](int i, int j) { return 1 + (i - 1) * n_lon + (j % n_lon); };
  for (int j = 0; j < n_lon; ++j) tris.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i < n_lat - 1; ++i) {
    for (int j = 0; j < n_lon; ++j) {
      tris.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      tris.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  }
  for (int j = 0; j < n_lon; ++j) tris.push_back({south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)});
  return ObjectModel(id, std::move(verts), std::move(tris));
}

inline ObjectModel make_box(const std::string& id, double sx, double sy, double sz, int subdiv = 8) {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  const Vec3 half(sx / 2, sy / 2, sz / 2);
  // Six face grids. Edge vertices are duplicated between faces; the surface
  // is still geometrically closed, which is all the parity test needs.
  struct Face {
    Vec3 origin, du, dv;
  };
  const std::array<Face, 6> faces = {{
      {{-half.x(), -half.y(), half.z()}, {sx, 0, 0}, {0, sy, 0}},    // +z
      {{-half.x(), half.y(), -half.z()}, {sx, 0, 0}, {0, -sy, 0}},   // -z
      {{half.x(), -half.y(), -half.z()}, {0, sy, 0}, {0, 0, sz}},    // +x
      {{-half.x(), -half.y(), -half.z()}, {0, 0, sz}, {0, sy, 0}},   // -x
      {{-half.x(), half.y(), -half.z()}, {0, 0, sz}, {sx, 0, 0}},    // +y
      {{-half.x(), -half.y(), -half.z()}, {sx, 0, 0}, {0, 0, sz}},   // -y
  }};
  for (const auto& f : faces) {
    const int base = static_cast<int>(verts.size());
    for (int i = 0; i <= subdiv; ++i) {
      for (int j = 0; j <= subdiv; ++j) {
        verts.push_back(f.origin + f.du * (double(i) / subdiv) + f.dv * (double(j) / subdiv));
      }
    }
    auto vid = [&](int i, int j) { return base + i * (subdiv + 1) + j; };
    for (int i = 0; i < subdiv; ++i) {
      for (int j = 0; j < subdiv; ++j) {
        tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      }
    }
  }
  return ObjectModel(id, std::move(verts), std::move(tris));
}

inline ObjectModel make_cylinder(const std::string& id, double radius, double height,
                                 int n_seg = 48, int n_height = 8) {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  const double h0 = -height / 2;
  for (int i = 0; i <= n_height; ++i) {
    const double z = h0 + height * i / n_height;
    for (int j = 0; j < n_seg; ++j) {
      const double phi = kTwoPi * j / n_seg;
      verts.emplace_back(radius * std::cos(phi), radius * std::sin(phi), z);
    }
  }
  auto ring = [&](int i, int j) { return i * n_seg + (j % n_seg); };
  for (int i = 0; i < n_height; ++i) {
    for (int j = 0; j < n_seg; ++j) {
      tris.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)});
      tris.push_back({ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)});
    }
  }
  const int bottom_center = static_cast<int>(verts.size());
  verts.emplace_back(0, 0, h0);
  const int top_center = static_cast<int>(verts.size());
  verts.emplace_back(0, 0, h0 + height);
  for (int j = 0; j < n_seg; ++j) {
    tris.push_back({bottom_center, ring(0, j + 1), ring(0, j)});
    tris.push_back({top_center, ring(n_height, j), ring(n_height, j + 1)});
  }
  return ObjectModel(id, std::move(verts), std::move(tris));
}

// ---------------------------------------------------------------------------
// Wavefront OBJ ingestion (positions and faces only; n-gons fan-triangulated).
// ---------------------------------------------------------------------------

inline ObjectModel load_obj(const std::string& path, const std::string& id = "") {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OBJ file: " + path);
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw MeshError("malformed vertex line in " + path);
      verts.emplace_back(x, y, z);
    } else if (tok == "f") {
      std::vector<int> face;
      std::string ref;
      while (ss >> ref) {
        // "i", "i/t", "i//n", "i/t/n"; negative indices are relative.
        const std::size_t slash = ref.find('/');
        int idx = std::stoi(slash == std::string::npos ? ref : ref.substr(0, slash));
        if (idx < 0) idx = static_cast<int>(verts.size()) + idx + 1;
        face.push_back(idx - 1);
      }
      if (face.size() < 3) throw MeshError("face with fewer than 3 vertices in " + path);
      for (std::size_t k = 1; k + 1 < face.size(); ++k) {
        tris.push_back({face[0], face[k], face[k + 1]});
      }
    }
  }
  std::string mesh_id = id;
  if (mesh_id.empty()) {
    const std::size_t start = path.find_last_of("/\\");
    std::string stem = start == std::string::npos ? path : path.substr(start + 1);
    const std::size_t dot = stem.rfind('.');
    mesh_id = dot == std::string::npos ? stem : stem.substr(0, dot);
  }
  return ObjectModel(mesh_id, std::move(verts), std::move(tris));
}

inline void save_obj(const ObjectModel& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write OBJ file: " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles())
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!out) throw IoError("failed writing OBJ file: " + path);
}

}  // namespace hovsyn
