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

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hovsyn/ccv_space.hpp"
#include "hovsyn/error.hpp"
#include "hovsyn/grasp_forge.hpp"
#include "hovsyn/pose_eval.hpp"
#include "hovsyn/scene_synthesis.hpp"

namespace hovsyn {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON helpers. All values are raw doubles; nlohmann emits shortest
// round-trip representations, so write -> read -> write is byte-stable.
// ---------------------------------------------------------------------------

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Json to_json(const QuatPose& p) {
  return Json{{"q", {p.q[0], p.q[1], p.q[2], p.q[3]}}, {"t", to_json(p.t)}};
}

inline QuatPose quat_pose_from_json(const Json& j) {
  QuatPose p;
  const auto& q = j.at("q");
  if (!q.is_array() || q.size() != 4) throw IoError("expected a quaternion (w, x, y, z)");
  for (int i = 0; i < 4; ++i) p.q[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)].get<double>();
  p.t = vec3_from_json(j.at("t"));
  return p;
}

// ---------------------------------------------------------------------------
// Grasp candidates: JSON Lines, one candidate per line.
// ---------------------------------------------------------------------------

inline Json to_json(const GraspCandidate& c) {
  Json fingers = Json::array();
  for (const auto& f : c.fingers) fingers.push_back({f.splay, f.bend_mcp, f.bend_pd});
  Json assignments = Json::array();
  for (const auto& a : c.assignments) {
    assignments.push_back({{"finger", a.finger_id},
                           {"tip", to_json(a.fingertip_point)},
                           {"vertex", to_json(a.contact_vertex)},
                           {"vertex_id", a.contact_vertex_id},
                           {"r_c", a.min_radius}});
  }
  Json tip_dist = Json::array();
  for (double d : c.diagnostics.fingertip_distance) tip_dist.push_back(d);
  return Json{{"object_id", c.object_id},
              {"wrist", to_json(c.wrist)},
              {"fingers", fingers},
              {"assignments", assignments},
              {"diagnostics",
               {{"max_penetration", c.diagnostics.max_penetration},
                {"fingertip_distance", tip_dist},
                {"fit_residual", c.diagnostics.fit_residual},
                {"converged", c.diagnostics.converged},
                {"iterations", c.diagnostics.iterations}}}};
}

inline GraspCandidate grasp_from_json(const Json& j) {
  GraspCandidate c;
  c.object_id = j.at("object_id").get<std::string>();
  c.wrist = quat_pose_from_json(j.at("wrist"));
  const auto& fingers = j.at("fingers");
  if (fingers.size() != kFingerCount) throw IoError("grasp record needs 5 finger entries");
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& entry = fingers[static_cast<std::size_t>(f)];
    c.fingers[static_cast<std::size_t>(f)] = {entry[0].get<double>(), entry[1].get<double>(), entry[2].get<double>()};
  }
  for (const auto& a : j.at("assignments")) {
    ContactAssignment assign;
    assign.finger_id = a.at("finger").get<int>();
    assign.fingertip_point = vec3_from_json(a.at("tip"));
    assign.contact_vertex = vec3_from_json(a.at("vertex"));
    assign.contact_vertex_id = a.at("vertex_id").get<int>();
    assign.min_radius = a.at("r_c").get<double>();
    c.assignments.push_back(assign);
  }
  const auto& d = j.at("diagnostics");
  c.diagnostics.max_penetration = d.at("max_penetration").get<double>();
  const auto& tips = d.at("fingertip_distance");
  if (tips.size() != kFingerCount) throw IoError("grasp diagnostics need 5 fingertip distances");
  for (int f = 0; f < kFingerCount; ++f) c.diagnostics.fingertip_distance[static_cast<std::size_t>(f)] = tips[static_cast<std::size_t>(f)].get<double>();
  c.diagnostics.fit_residual = d.at("fit_residual").get<double>();
  c.diagnostics.converged = d.at("converged").get<bool>();
  c.diagnostics.iterations = d.at("iterations").get<int>();
  return c;
}

inline void write_grasps(const std::vector<GraspCandidate>& grasps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write grasp file: " + path);
  for (const auto& g : grasps) out << to_json(g).dump() << '\n';
  if (!out) throw IoError("failed writing grasp file: " + path);
}

inline std::vector<GraspCandidate> read_grasps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grasp file: " + path);
  std::vector<GraspCandidate> grasps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    grasps.push_back(grasp_from_json(Json::parse(line)));
  }
  return grasps;
}

// ---------------------------------------------------------------------------
// Scene descriptors: JSON Lines with schema version "sdv": 1.
// ---------------------------------------------------------------------------

inline Json to_json(const SceneDescriptor& s) {
  Json joints = Json::array();
  for (const auto& j : s.joints) joints.push_back({j.twist, j.splay, j.bend});
  Json shape = Json::array();
  for (double c : s.shape.coefficients) shape.push_back(c);
  return Json{{"sdv", 1},
              {"triplet", {s.triplet.object_id, s.triplet.pose_id, s.triplet.viewpoint_id}},
              {"seed", s.seed},
              {"wrist", to_json(s.wrist)},
              {"joints", joints},
              {"shape", shape},
              {"object", to_json(s.object_transform)},
              {"camera", to_json(s.camera)},
              {"intrinsics",
               {{"fx", s.intrinsics.fx},
                {"fy", s.intrinsics.fy},
                {"cx", s.intrinsics.cx},
                {"cy", s.intrinsics.cy},
                {"width", s.intrinsics.width},
                {"height", s.intrinsics.height}}},
              {"background_id", s.background_id},
              {"texture_id", s.texture_id}};
}

inline SceneDescriptor scene_from_json(const Json& j) {
  if (j.at("sdv").get<int>() != 1) throw IoError("unsupported scene descriptor schema version");
  SceneDescriptor s;
  const auto& t = j.at("triplet");
  s.triplet = {t[0].get<std::uint32_t>(), t[1].get<std::uint32_t>(), t[2].get<std::uint32_t>()};
  s.seed = j.at("seed").get<std::uint64_t>();
  s.wrist = quat_pose_from_json(j.at("wrist"));
  const auto& joints = j.at("joints");
  if (joints.size() != kArticulatedCount) throw IoError("scene descriptor needs 15 joint entries");
  for (int k = 0; k < kArticulatedCount; ++k) {
    const auto& entry = joints[static_cast<std::size_t>(k)];
    s.joints[static_cast<std::size_t>(k)] = {entry[0].get<double>(), entry[1].get<double>(), entry[2].get<double>()};
  }
  const auto& shape = j.at("shape");
  if (shape.size() != 10) throw IoError("scene descriptor needs 10 shape coefficients");
  for (int k = 0; k < 10; ++k) s.shape.coefficients[static_cast<std::size_t>(k)] = shape[static_cast<std::size_t>(k)].get<double>();
  s.object_transform = quat_pose_from_json(j.at("object"));
  s.camera = quat_pose_from_json(j.at("camera"));
  const auto& intr = j.at("intrinsics");
  s.intrinsics.fx = intr.at("fx").get<double>();
  s.intrinsics.fy = intr.at("fy").get<double>();
  s.intrinsics.cx = intr.at("cx").get<double>();
  s.intrinsics.cy = intr.at("cy").get<double>();
  s.intrinsics.width = intr.at("width").get<int>();
  s.intrinsics.height = intr.at("height").get<int>();
  s.background_id = j.at("background_id").get<std::uint32_t>();
  s.texture_id = j.at("texture_id").get<std::uint32_t>();
  return s;
}

inline void write_scenes(const std::vector<SceneDescriptor>& scenes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file: " + path);
  for (const auto& s : scenes) out << to_json(s).dump() << '\n';
  if (!out) throw IoError("failed writing scene file: " + path);
}

inline std::vector<SceneDescriptor> read_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file: " + path);
  std::vector<SceneDescriptor> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    scenes.push_back(scene_from_json(Json::parse(line)));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Space manifest: dimensions plus the files backing the pose tables.
// ---------------------------------------------------------------------------

struct SpaceManifest {
  SpaceDims dims;
  std::pair<int, int> grid{12, 24};
  std::vector<std::string> grasp_files;  // one per object, in object order
  std::string weight_snapshot;

  friend bool operator==(const SpaceManifest&, const SpaceManifest&) = default;
};

inline void write_manifest(const SpaceManifest& m, const std::string& path) {
  Json j{{"dims", {m.dims.n_objects, m.dims.n_poses, m.dims.n_viewpoints}},
         {"grid", {m.grid.first, m.grid.second}},
         {"grasp_files", m.grasp_files},
         {"weight_snapshot", m.weight_snapshot}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

inline SpaceManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  Json j = Json::parse(in);
  SpaceManifest m;
  m.dims = {j.at("dims")[0].get<std::uint64_t>(), j.at("dims")[1].get<std::uint64_t>(),
            j.at("dims")[2].get<std::uint64_t>()};
  m.grid = {j.at("grid")[0].get<int>(), j.at("grid")[1].get<int>()};
  m.grasp_files = j.at("grasp_files").get<std::vector<std::string>>();
  m.weight_snapshot = j.at("weight_snapshot").get<std::string>();
  return m;
}

// ---------------------------------------------------------------------------
// Symmetry sets: JSON with row-major 3x3 matrices.
// ---------------------------------------------------------------------------

inline void write_symmetry_set(const SymmetrySet& set, const std::string& object_id,
                               const std::string& path) {
  Json rotations = Json::array();
  for (const Mat3& R : set.rotations) {
    Json row = Json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) row.push_back(R(r, c));
    rotations.push_back(row);
  }
  Json j{{"object_id", object_id},
         {"rotations", rotations},
         {"residuals", set.residuals},
         {"warnings", set.warnings}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write symmetry set: " + path);
  out << j.dump(2) << '\n';
}

inline SymmetrySet read_symmetry_set(const std::string& path, std::string* object_id = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open symmetry set: " + path);
  Json j = Json::parse(in);
  SymmetrySet set;
  for (const auto& row : j.at("rotations")) {
    if (row.size() != 9) throw IoError("rotation entries must hold 9 values");
    Mat3 R;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) R(r, c) = row[static_cast<std::size_t>(3 * r + c)].get<double>();
    set.rotations.push_back(R);
  }
  set.residuals = j.at("residuals").get<std::vector<double>>();
  set.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (object_id) *object_id = j.at("object_id").get<std::string>();
  if (set.rotations.size() != set.residuals.size())
    throw IoError("residual count mismatch in symmetry set: " + path);
  return set;
}

// ---------------------------------------------------------------------------
// Evaluation records: JSON Lines of {id, hand[21], obj_r, obj_t}.
// ---------------------------------------------------------------------------

struct EvalRecord {
  std::string id;
  std::array<Vec3, 21> hand{};
  Vec3 obj_r = Vec3::Zero();  // so(3)
  Vec3 obj_t = Vec3::Zero();

  friend bool operator==(const EvalRecord& a, const EvalRecord& b) {
    auto same = [](const Vec3& x, const Vec3& y) {
      return x.x() == y.x() && x.y() == y.y() && x.z() == y.z();
    };
    if (a.id != b.id || !same(a.obj_r, b.obj_r) || !same(a.obj_t, b.obj_t)) return false;
    for (int i = 0; i < 21; ++i) {
      if (!same(a.hand[static_cast<std::size_t>(i)], b.hand[static_cast<std::size_t>(i)])) return false;
    }
    return true;
  }
};

inline Json to_json(const EvalRecord& r) {
  Json hand = Json::array();
  for (const auto& p : r.hand) hand.push_back(to_json(p));
  return Json{{"id", r.id}, {"hand", hand}, {"obj_r", to_json(r.obj_r)}, {"obj_t", to_json(r.obj_t)}};
}

inline EvalRecord eval_record_from_json(const Json& j) {
  EvalRecord r;
  r.id = j.at("id").get<std::string>();
  const auto& hand = j.at("hand");
  if (hand.size() != 21) throw IoError("eval record needs 21 hand joints");
  for (int k = 0; k < 21; ++k) r.hand[static_cast<std::size_t>(k)] = vec3_from_json(hand[static_cast<std::size_t>(k)]);
  r.obj_r = vec3_from_json(j.at("obj_r"));
  r.obj_t = vec3_from_json(j.at("obj_t"));
  return r;
}

inline void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write eval records: " + path);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<EvalRecord> read_eval_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open eval records: " + path);
  std::vector<EvalRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(eval_record_from_json(Json::parse(line)));
  }
  return records;
}

// ---------------------------------------------------------------------------
// CSV: 17 significant digits, enough for exact double round-trips.
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Flat key=value config files: one key per line, '#' comments, no nesting.
// Unknown keys are rejected against the caller's registry.
// ---------------------------------------------------------------------------

class FlatConfig {
 public:
  FlatConfig() = default;

  static FlatConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_stream(in);
  }

  static FlatConfig parse_stream(std::istream& in) {
    FlatConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return std::string{};
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
      };
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(line_no));
      if (!config.values_.emplace(key, value).second)
        throw ConfigError("duplicate config key: " + key);
    }
    return config;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: " + it->second);
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: " + it->second);
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      out.push_back(std::stoull(tok));
    }
    return out;
  }

  /// Throws on any key outside the registry.
  void require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_) {
      if (!known.count(key)) throw ConfigError("unknown config key: " + key);
    }
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace hovsyn
