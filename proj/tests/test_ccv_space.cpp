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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "hovsyn/ccv_space.hpp"

using namespace hovsyn;

namespace {

WeightMap small_map(std::vector<double> weights) {
  WeightMap map({1, 1, static_cast<std::uint64_t>(weights.size())});
  for (std::size_t i = 0; i < weights.size(); ++i)
    map.set_weight({0, 0, static_cast<std::uint32_t>(i)}, weights[i]);
  return map;
}

}  // namespace

TEST_CASE("build_space matches the product rule") {
  const CCVSpace big = build_space(20, 100, {12, 24});
  REQUIRE(big.total() == 576000);
  REQUIRE(big.dims().n_viewpoints == 288);

  const CCVSpace tiny = build_space(1, 1, {1, 1});
  REQUIRE(tiny.total() == 1);

  const CCVSpace mid = build_space(2, 3, {2, 2});
  REQUIRE(mid.total() == 24);
  const WeightMap uniform(mid.dims());
  REQUIRE(uniform.total_weight() == 24.0);

  REQUIRE_THROWS_AS(build_space(0, 1, {1, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_space(1, 0, {1, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_space(1, 1, {0, 1}), std::invalid_argument);
}

TEST_CASE("probability_of normalizes weights") {
  SECTION("uniform case over the full-scale space") {
    WeightMap map({20, 100, 288});
    REQUIRE(map.size() == 576000);
    REQUIRE(probability_of(map, {0, 0, 0}) == Catch::Approx(1.0 / 576000).epsilon(1e-12));
    REQUIRE(probability_of(map, {19, 99, 287}) == Catch::Approx(1.0 / 576000).epsilon(1e-12));
  }

  SECTION("normalization example") {
    const WeightMap map = small_map({2, 1, 1});
    REQUIRE(probability_of(map, {0, 0, 0}) == 0.5);
    REQUIRE(probability_of(map, {0, 0, 1}) == 0.25);
    REQUIRE(probability_of(map, {0, 0, 2}) == 0.25);
  }

  SECTION("independent normalization oracle on random positive weights") {
    Rng rng(11);
    std::vector<double> weights(257);
    for (auto& w : weights) w = 0.05 + rng.uniform01() * 3.0;
    const WeightMap map = small_map(weights);
    // Second code path: explicit accumulation in index order.
    double total = 0.0;
    for (double w : weights) total += w;
    double prob_sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double p = probability_of(map, {0, 0, static_cast<std::uint32_t>(i)});
      REQUIRE(p == Catch::Approx(weights[i] / total).epsilon(1e-12));
      prob_sum += p;
    }
    REQUIRE(prob_sum == Catch::Approx(1.0).margin(1e-9));
  }

  SECTION("out-of-bounds index") {
    const WeightMap map = small_map({1, 1});
    REQUIRE_THROWS_AS(probability_of(map, {0, 0, 2}), std::invalid_argument);
    REQUIRE_THROWS_AS(probability_of(map, {1, 0, 0}), std::invalid_argument);
  }

  SECTION("larger weight implies larger first-draw probability") {
    Rng rng(12);
    std::vector<double> weights(50);
    for (auto& w : weights) w = 0.1 + rng.uniform01();
    const WeightMap map = small_map(weights);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[i] > weights[j]) {
          REQUIRE(probability_of(map, {0, 0, static_cast<std::uint32_t>(i)}) >
                  probability_of(map, {0, 0, static_cast<std::uint32_t>(j)}));
        }
      }
    }
  }
}

TEST_CASE("sample_triplets draws without replacement") {
  SECTION("degenerate support always yields index 0") {
    const WeightMap map = small_map({1, 0, 0});
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(static_cast<std::uint64_t>(trial));
      const auto out = sample_triplets(map, 1, rng);
      REQUIRE(out.size() == 1);
      REQUIRE(out[0].viewpoint_id == 0);
    }
  }

  SECTION("exhaustive draw is a permutation, even with zero weights") {
    const WeightMap map = small_map({1, 0, 0.5, 0, 2});
    Rng rng(99);
    const auto out = sample_triplets(map, 5, rng);
    std::set<std::uint32_t> seen;
    for (const auto& t : out) seen.insert(t.viewpoint_id);
    REQUIRE(seen.size() == 5);
  }

  SECTION("empirical first-draw frequency matches the multinomial") {
    const WeightMap map = small_map({3, 1});
    Rng rng(2024);
    int zero = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      if (sample_triplets(map, 1, rng)[0].viewpoint_id == 0) ++zero;
    }
    REQUIRE(std::abs(zero / static_cast<double>(n) - 0.75) < 0.01);
  }

  SECTION("fixed seed reproduces bit-identical output") {
    WeightMap map({2, 5, 7});
    Rng a(5), b(5);
    const auto out_a = sample_triplets(map, 40, a);
    const auto out_b = sample_triplets(map, 40, b);
    REQUIRE(out_a.size() == out_b.size());
    for (std::size_t i = 0; i < out_a.size(); ++i) REQUIRE(out_a[i] == out_b[i]);
  }

  SECTION("no duplicates in an epoch-sized draw") {
    WeightMap map({4, 10, 6});
    Rng rng(6);
    const auto out = sample_triplets(map, 200, rng);
    std::unordered_set<std::uint64_t> seen;
    for (const auto& t : out) REQUIRE(seen.insert(map.dims().flat(t)).second);
  }

  SECTION("over-draw is rejected") {
    WeightMap map({1, 1, 3});
    Rng rng(7);
    REQUIRE_THROWS_AS(sample_triplets(map, 4, rng), std::invalid_argument);
  }
}

TEST_CASE("weight_update implements the reciprocal percentile heuristic") {
  REQUIRE(weight_update(0.08, 0.01, 0.08) == 2.0);
  REQUIRE(weight_update(0.01, 0.01, 0.08) == 2.0 / 3.0);
  REQUIRE(weight_update(0.045, 0.01, 0.08) == 1.0);

  SECTION("strictly increasing in the error") {
    double prev = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double e = 0.01 + 0.07 * k / 100.0;
      const double dw = weight_update(e, 0.01, 0.08);
      REQUIRE(dw > prev);
      REQUIRE(dw >= 2.0 / 3.0);
      REQUIRE(dw <= 2.0);
      prev = dw;
    }
  }

  SECTION("degenerate epoch is neutral") { REQUIRE(weight_update(0.05, 0.05, 0.05) == 1.0); }

  SECTION("invalid ranges throw") {
    REQUIRE_THROWS_AS(weight_update(0.05, 0.08, 0.01), std::invalid_argument);
    REQUIRE_THROWS_AS(weight_update(0.09, 0.01, 0.08), std::invalid_argument);
  }
}

TEST_CASE("apply_epoch_feedback multiplies and clamps") {
  SECTION("hardest sample doubles its weight") {
    WeightMap map({1, 1, 4});
    apply_epoch_feedback(map, {{{0, 0, 0}, 0.08}, {{0, 0, 1}, 0.02}});
    REQUIRE(map.weight({0, 0, 0}) == 2.0);
    REQUIRE(map.weight({0, 0, 1}) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  }

  SECTION("upper clamp holds") {
    WeightMap map({1, 1, 4});
    map.set_weight({0, 0, 0}, 1.5);
    apply_epoch_feedback(map, {{{0, 0, 0}, 0.08}, {{0, 0, 1}, 0.02}});
    REQUIRE(map.weight({0, 0, 0}) == 2.0);  // 1.5 * 2 clamps, not 3.0
  }

  SECTION("entries outside the records keep exact weights") {
    WeightMap map({1, 1, 4});
    map.set_weight({0, 0, 2}, 1.2345);
    apply_epoch_feedback(map, {{{0, 0, 0}, 0.08}, {{0, 0, 1}, 0.02}});
    REQUIRE(map.weight({0, 0, 2}) == 1.2345);
    REQUIRE(map.weight({0, 0, 3}) == 1.0);
  }

  SECTION("duplicate triplets are rejected") {
    WeightMap map({1, 1, 4});
    REQUIRE_THROWS_AS(apply_epoch_feedback(map, {{{0, 0, 0}, 0.08}, {{0, 0, 0}, 0.02}}),
                      std::invalid_argument);
  }

  SECTION("invalid errors are rejected") {
    WeightMap map({1, 1, 4});
    REQUIRE_THROWS_AS(apply_epoch_feedback(map, {{{0, 0, 0}, -0.1}}), std::invalid_argument);
    REQUIRE_THROWS_AS(apply_epoch_feedback(map, {}), std::invalid_argument);
  }

  SECTION("weights stay inside the clamp band over 100 random epochs") {
    WeightMap map({2, 4, 8});
    Rng rng(21);
    for (int epoch = 0; epoch < 100; ++epoch) {
      const auto triplets = sample_triplets(map, 24, rng);
      std::vector<FeedbackRecord> records;
      for (const auto& t : triplets) records.push_back({t, 0.001 + 0.05 * rng.uniform01()});
      apply_epoch_feedback(map, records);
      for (std::uint64_t i = 0; i < map.size(); ++i) {
        REQUIRE(map.weight_flat(i) >= 0.1);
        REQUIRE(map.weight_flat(i) <= 2.0);
      }
    }
  }
}

TEST_CASE("weight snapshot round-trips and validates") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hovsyn_ccvw_test";
  fs::create_directories(dir);
  const std::string path = (dir / "weights.ccvw").string();

  WeightMap map({2, 3, 4});
  Rng rng(31);
  for (std::uint64_t i = 0; i < map.size(); ++i)
    map.set_weight(map.dims().unflat(i), 0.1 + 1.9 * rng.uniform01());
  save_weight_snapshot(map, path);

  SECTION("round trip is exact") {
    const WeightMap loaded = load_weight_snapshot(path);
    REQUIRE(loaded.dims() == map.dims());
    for (std::uint64_t i = 0; i < map.size(); ++i)
      REQUIRE(loaded.weight_flat(i) == map.weight_flat(i));
  }

  SECTION("bad magic is rejected") {
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    bytes[0] = 'X';
    const std::string bad = (dir / "bad_magic.ccvw").string();
    std::ofstream(bad, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    REQUIRE_THROWS_AS(load_weight_snapshot(bad), IoError);
  }

  SECTION("truncation is rejected") {
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    const std::string bad = (dir / "truncated.ccvw").string();
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    REQUIRE_THROWS_AS(load_weight_snapshot(bad), IoError);
  }

  SECTION("trailing bytes are rejected") {
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    bytes += "junk";
    const std::string bad = (dir / "trailing.ccvw").string();
    std::ofstream(bad, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    REQUIRE_THROWS_AS(load_weight_snapshot(bad), IoError);
  }
}
