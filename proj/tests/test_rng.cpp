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

#include "hovsyn/rng.hpp"

using namespace hovsyn;

TEST_CASE("rng is deterministic for a fixed seed") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.uniform01() == b.uniform01());
}

TEST_CASE("derived streams are independent and reproducible") {
  Rng base(7);
  Rng a = base.derive("alpha");
  Rng b = base.derive("beta");
  Rng a2 = base.derive("alpha");
  REQUIRE(a.seed() != b.seed());
  for (int i = 0; i < 100; ++i) REQUIRE(a.uniform01() == a2.uniform01());
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("uniform_below respects the bound") {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) REQUIRE(rng.uniform_below(7) < 7);
  REQUIRE(rng.uniform_below(1) == 0);
  REQUIRE(rng.uniform_below(0) == 0);
}

TEST_CASE("normal moments match over a large sample") {
  Rng rng(3);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(0.0, 1.0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum_sq / n - mean * mean);
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(stddev - 1.0) < 0.01);
}

TEST_CASE("zero-stddev normal returns the mean exactly") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) REQUIRE(rng.normal(1.5, 0.0) == 1.5);
}
