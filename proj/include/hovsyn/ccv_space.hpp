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
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "hovsyn/error.hpp"
#include "hovsyn/grasp_forge.hpp"
#include "hovsyn/rng.hpp"
#include "hovsyn/viewpoints.hpp"

namespace hovsyn {

/// One (object, hand pose, viewpoint) cell of the discrete sampling space.
struct TripletIndex {
  std::uint32_t object_id = 0;
  std::uint32_t pose_id = 0;
  std::uint32_t viewpoint_id = 0;

  friend bool operator==(const TripletIndex&, const TripletIndex&) = default;
};

struct SpaceDims {
  std::uint64_t n_objects = 0;
  std::uint64_t n_poses = 0;
  std::uint64_t n_viewpoints = 0;

  std::uint64_t total() const { return n_objects * n_poses * n_viewpoints; }

  bool contains(const TripletIndex& t) const {
    return t.object_id < n_objects && t.pose_id < n_poses && t.viewpoint_id < n_viewpoints;
  }

  std::uint64_t flat(const TripletIndex& t) const {
    if (!contains(t)) throw std::invalid_argument("triplet index out of bounds");
    return (static_cast<std::uint64_t>(t.object_id) * n_poses + t.pose_id) * n_viewpoints +
           t.viewpoint_id;
  }

  TripletIndex unflat(std::uint64_t i) const {
    TripletIndex t;
    t.viewpoint_id = static_cast<std::uint32_t>(i % n_viewpoints);
    i /= n_viewpoints;
    t.pose_id = static_cast<std::uint32_t>(i % n_poses);
    t.object_id = static_cast<std::uint32_t>(i / n_poses);
    return t;
  }

  friend bool operator==(const SpaceDims&, const SpaceDims&) = default;
};

/// The discrete object x pose x viewpoint space. The viewpoint table is
/// always populated; grasp tables are attached per object once synthesized.
class CCVSpace {
 public:
  CCVSpace(SpaceDims dims, std::vector<ViewpointSample> viewpoints)
      : dims_(dims), viewpoints_(std::move(viewpoints)) {
    if (dims_.n_objects < 1 || dims_.n_poses < 1 || dims_.n_viewpoints < 1)
      throw std::invalid_argument("space dimensions must be >= 1");
    if (viewpoints_.size() != dims_.n_viewpoints)
      throw std::invalid_argument("viewpoint table size must equal n_viewpoints");
    poses_.resize(dims_.n_objects);
  }

  const SpaceDims& dims() const { return dims_; }
  std::uint64_t total() const { return dims_.total(); }

  const ViewpointSample& viewpoint(std::uint32_t id) const {
    if (id >= dims_.n_viewpoints) throw std::invalid_argument("viewpoint id out of bounds");
    return viewpoints_[id];
  }
  const std::vector<ViewpointSample>& viewpoint_table() const { return viewpoints_; }

  void attach_poses(std::uint32_t object_id, std::vector<GraspCandidate> grasps) {
    if (object_id >= dims_.n_objects) throw std::invalid_argument("object id out of bounds");
    if (grasps.size() != dims_.n_poses)
      throw ConfigError("object " + std::to_string(object_id) + " has " +
                        std::to_string(grasps.size()) + " poses, expected " +
                        std::to_string(dims_.n_poses));
    poses_[object_id] = std::move(grasps);
  }

  bool has_poses() const {
    return std::all_of(poses_.begin(), poses_.end(),
                       [&](const auto& v) { return v.size() == dims_.n_poses; });
  }

  const GraspCandidate& grasp(std::uint32_t object_id, std::uint32_t pose_id) const {
    if (object_id >= dims_.n_objects || pose_id >= dims_.n_poses)
      throw std::invalid_argument("grasp index out of bounds");
    if (poses_[object_id].size() != dims_.n_poses)
      throw std::invalid_argument("object " + std::to_string(object_id) + " has no pose table");
    return poses_[object_id][pose_id];
  }

 private:
  SpaceDims dims_;
  std::vector<ViewpointSample> viewpoints_;
  std::vector<std::vector<GraspCandidate>> poses_;
};

/// Space with an n_u x n_phi viewpoint grid and N_v = n_u * n_phi.
inline CCVSpace build_space(std::uint64_t n_objects, std::uint64_t poses_per_object,
                            std::pair<int, int> viewpoint_grid) {
  if (n_objects < 1 || poses_per_object < 1 || viewpoint_grid.first < 1 ||
      viewpoint_grid.second < 1)
    throw std::invalid_argument("all space dimensions must be >= 1");
  auto grid = sphere_grid(viewpoint_grid.first, viewpoint_grid.second);
  SpaceDims dims{n_objects, poses_per_object, grid.size()};
  return CCVSpace(dims, std::move(grid));
}

/// One loss-feedback record for a sampled triplet.
struct FeedbackRecord {
  TripletIndex triplet;
  double error = 0.0;  // MPJPE-style scalar, meters
};

/// Per-triplet sampling weights, dense, clamped to [lower_bound, upper_bound]
/// by every re-weighting pass. Fresh maps are uniform all-ones.
class WeightMap {
 public:
  explicit WeightMap(SpaceDims dims, double lower_bound = 0.1, double upper_bound = 2.0)
      : dims_(dims), lower_(lower_bound), upper_(upper_bound) {
    if (dims.total() == 0) throw std::invalid_argument("weight map needs nonzero dimensions");
    if (!(lower_ > 0.0) || !(upper_ >= lower_))
      throw std::invalid_argument("weight bounds must satisfy 0 < lower <= upper");
    weights_.assign(dims.total(), 1.0);
  }

  const SpaceDims& dims() const { return dims_; }
  std::uint64_t size() const { return weights_.size(); }
  double lower_bound() const { return lower_; }
  double upper_bound() const { return upper_; }

  double weight(const TripletIndex& t) const { return weights_[dims_.flat(t)]; }
  double weight_flat(std::uint64_t i) const { return weights_.at(i); }
  const std::vector<double>& weights() const { return weights_; }

  void set_weight(const TripletIndex& t, double w) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weight must be finite and >= 0");
    weights_[dims_.flat(t)] = w;
  }

  double total_weight() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

 private:
  friend WeightMap load_weight_snapshot(const std::string& path);

  SpaceDims dims_;
  double lower_, upper_;
  std::vector<double> weights_;
};

/// p_i = w_i / sum_j w_j.
inline double probability_of(const WeightMap& map, const TripletIndex& idx) {
  const double total = map.total_weight();
  if (!(total > 0.0)) throw std::invalid_argument("weight map sum must be positive");
  return map.weight(idx) / total;
}

namespace detail {

/// Fenwick (binary indexed) tree over nonnegative reals with prefix-sum
/// search; keeps each weighted draw-and-remove O(log N).
class CumulativeSumTree {
 public:
  explicit CumulativeSumTree(const std::vector<double>& values)
      : n_(values.size()), tree_(values.size() + 1, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) tree_[i + 1] = values[i];
    for (std::size_t i = 1; i <= n_; ++i) {
      const std::size_t parent = i + (i & (~i + 1));
      if (parent <= n_) tree_[parent] += tree_[i];
    }
    total_ = prefix_sum(n_);
  }

  double total() const { return total_; }

  void add(std::size_t index, double delta) {
    for (std::size_t i = index + 1; i <= n_; i += i & (~i + 1)) tree_[i] += delta;
    total_ += delta;
  }

  /// Smallest index with prefix sum (inclusive) > target. target in [0, total).
  std::size_t upper_bound(double target) const {
    std::size_t pos = 0;
    std::size_t mask = std::bit_floor(n_);
    double remaining = target;
    while (mask > 0) {
      const std::size_t next = pos + mask;
      if (next <= n_ && tree_[next] <= remaining) {
        pos = next;
        remaining -= tree_[next];
      }
      mask >>= 1;
    }
    return pos;  // first index whose inclusion pushes the sum past target
  }

  double prefix_sum(std::size_t count) const {
    double s = 0.0;
    for (std::size_t i = count; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::size_t n_;
  std::vector<double> tree_;
  double total_;
};

}  // namespace detail

/// n distinct triplets from the multinomial induced by the weights, each draw
/// removing the drawn entry from the pool. Deterministic for a fixed seed.
/// If the remaining pool weight hits zero before n draws (possible only with
/// zero-weight entries), the remainder is filled by a uniform shuffle of the
/// leftover entries so an exhaustive draw is always a permutation.
inline std::vector<TripletIndex> sample_triplets(const WeightMap& map, std::uint64_t n, Rng& rng) {
  if (n > map.size()) throw std::invalid_argument("cannot draw more triplets than the space holds");
  std::vector<TripletIndex> out;
  out.reserve(n);
  if (n == 0) return out;

  detail::CumulativeSumTree tree(map.weights());
  std::vector<bool> drawn(map.size(), false);
  std::uint64_t remaining = n;
  while (remaining > 0 && tree.total() > 1e-300) {
    const double target = rng.uniform01() * tree.total();
    std::size_t idx = tree.upper_bound(std::min(target, tree.total() * (1.0 - 1e-16)));
    if (idx >= map.size()) idx = map.size() - 1;  // float edge guard
    // upper_bound can land on a zero-weight or already-drawn slot only
    // through float round-off at the pool edge; step to the next live slot.
    while (idx < map.size() && (drawn[idx] || map.weight_flat(idx) <= 0.0)) ++idx;
    if (idx >= map.size()) break;
    out.push_back(map.dims().unflat(idx));
    drawn[idx] = true;
    tree.add(idx, -map.weight_flat(idx));
    --remaining;
  }
  if (remaining > 0) {
    std::vector<std::uint64_t> leftovers;
    for (std::uint64_t i = 0; i < map.size(); ++i) {
      if (!drawn[i]) leftovers.push_back(i);
    }
    for (std::uint64_t k = 0; k < remaining; ++k) {
      const std::uint64_t j = k + rng.uniform_below(leftovers.size() - k);
      std::swap(leftovers[k], leftovers[j]);
      out.push_back(map.dims().unflat(leftovers[k]));
    }
  }
  return out;
}

/// Reciprocal percentile heuristic: q = (e_max - e) / (e_max - e_min),
/// delta_w = 1 / (q + 0.5). Hardest sample gets 2, easiest 2/3. A degenerate
/// epoch (e_max == e_min) leaves weights untouched via a neutral 1.
inline double weight_update(double error, double e_min, double e_max) {
  if (e_max < e_min) throw std::invalid_argument("e_max must be >= e_min");
  if (!(error >= e_min && error <= e_max))
    throw std::invalid_argument("error must lie in [e_min, e_max]");
  if (e_max == e_min) return 1.0;
  const double q = (e_max - error) / (e_max - e_min);
  return 1.0 / (q + 0.5);
}

/// Multiplies each recorded triplet's weight by its update factor and clamps
/// into [lower, upper]. Entries without a record keep their exact weight.
inline void apply_epoch_feedback(WeightMap& map, const std::vector<FeedbackRecord>& records) {
  if (records.empty()) throw std::invalid_argument("feedback records must be nonempty");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(records.size());
  double e_min = std::numeric_limits<double>::infinity();
  double e_max = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (!std::isfinite(r.error) || r.error < 0.0)
      throw std::invalid_argument("feedback error must be finite and >= 0");
    if (!seen.insert(map.dims().flat(r.triplet)).second)
      throw std::invalid_argument("duplicate triplet in feedback records");
    e_min = std::min(e_min, r.error);
    e_max = std::max(e_max, r.error);
  }
  for (const auto& r : records) {
    const double updated = map.weight(r.triplet) * weight_update(r.error, e_min, e_max);
    map.set_weight(r.triplet, std::clamp(updated, map.lower_bound(), map.upper_bound()));
  }
}

// ---------------------------------------------------------------------------
// Weight-map snapshot: "CCVW", version byte, three u64 LE dims, then
// dims-product f64 LE weights.
// ---------------------------------------------------------------------------

inline constexpr char kWeightMagic[4] = {'C', 'C', 'V', 'W'};
inline constexpr std::uint8_t kWeightVersion = 1;

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline std::uint64_t get_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint64_t double_bits(double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  return v;
}

inline double bits_double(std::uint64_t v) {
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

inline void save_weight_snapshot(const WeightMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weight snapshot: " + path);
  out.write(kWeightMagic, 4);
  out.put(static_cast<char>(kWeightVersion));
  detail::put_u64_le(out, map.dims().n_objects);
  detail::put_u64_le(out, map.dims().n_poses);
  detail::put_u64_le(out, map.dims().n_viewpoints);
  for (double w : map.weights()) detail::put_u64_le(out, detail::double_bits(w));
  if (!out) throw IoError("failed writing weight snapshot: " + path);
}

inline WeightMap load_weight_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight snapshot: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kWeightMagic, 4) != 0)
    throw IoError("bad magic in weight snapshot: " + path);
  const int version = in.get();
  if (version != kWeightVersion)
    throw IoError("unsupported weight snapshot version " + std::to_string(version));
  SpaceDims dims;
  dims.n_objects = detail::get_u64_le(in);
  dims.n_poses = detail::get_u64_le(in);
  dims.n_viewpoints = detail::get_u64_le(in);
  if (!in || dims.total() == 0) throw IoError("bad dimensions in weight snapshot: " + path);
  WeightMap map(dims);
  for (std::uint64_t i = 0; i < dims.total(); ++i) {
    const std::uint64_t bits = detail::get_u64_le(in);
    if (!in) throw IoError("truncated weight snapshot: " + path);
    const double w = detail::bits_double(bits);
    if (!std::isfinite(w) || w < 0.0) throw IoError("invalid weight value in snapshot: " + path);
    map.weights_[i] = w;
  }
  in.peek();
  if (!in.eof()) throw IoError("trailing bytes in weight snapshot: " + path);
  return map;
}

}  // namespace hovsyn
