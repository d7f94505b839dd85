// Copyright 2026 The tsca Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "tsca/context.hpp"

using namespace tsca;

TEST_CASE("context ranges reproduce the published grid") {
  ContextConfig cfg;
  cfg.c0 = 10;
  cfg.r0 = 0;
  cfg.n = 3;
  cfg.d_step = 3;
  auto ranges = context_ranges(cfg);
  REQUIRE(ranges.chunk_sizes == std::vector<long>({10, 13, 16, 19}));
  REQUIRE(ranges.right_sizes == std::vector<long>({0, 3, 6, 9}));
}

TEST_CASE("single-element range") {
  ContextConfig cfg;
  cfg.c0 = 5;
  cfg.r0 = 0;
  cfg.n = 0;
  cfg.d_step = 1;
  auto ranges = context_ranges(cfg);
  REQUIRE(ranges.chunk_sizes == std::vector<long>({5}));
  REQUIRE(ranges.right_sizes == std::vector<long>({0}));
}

TEST_CASE("every generated pair satisfies r < c") {
  // c_i = c0 + r_i keeps r_i < c_i whenever c0 >= 1; sweep a small grid to
  // pin that down rather than assume it.
  for (long c0 = 1; c0 <= 6; ++c0)
    for (long r0 = 0; r0 <= 4; ++r0)
      for (long n = 0; n <= 3; ++n)
        for (long d = 1; d <= 3; ++d) {
          ContextConfig cfg;
          cfg.c0 = c0;
          cfg.r0 = r0;
          cfg.n = n;
          cfg.d_step = d;
          auto ranges = context_ranges(cfg);
          for (std::size_t i = 0; i < ranges.size(); ++i)
            REQUIRE(ranges.right_sizes[i] < ranges.chunk_sizes[i]);
        }
}

TEST_CASE("invalid configs are rejected") {
  ContextConfig cfg;
  cfg.c0 = 0;
  REQUIRE_THROWS_AS(context_ranges(cfg), InvalidConfig);
  cfg = ContextConfig{};
  cfg.p = 1.5;
  REQUIRE_THROWS_AS(context_ranges(cfg), InvalidConfig);
  cfg = ContextConfig{};
  cfg.kernel_size = 4;
  REQUIRE_THROWS_AS(context_ranges(cfg), InvalidConfig);
  cfg = ContextConfig{};
  cfg.kernel_size = 15;
  REQUIRE(cfg.l_conv() == 7);
}

TEST_CASE("training context sampling is uniform") {
  ContextConfig cfg;  // defaults give the 4-pair grid
  auto ranges = context_ranges(cfg);
  Rng rng(2024);
  std::map<long, long> counts;
  const long draws = 10000;
  for (long i = 0; i < draws; ++i) {
    auto [c, r] = sample_training_context(ranges, rng);
    REQUIRE(c == 10 + r);
    counts[r] += 1;
  }
  // each pair frequency close to 25%
  for (auto& [r, n] : counts) {
    double freq = static_cast<double>(n) / draws;
    REQUIRE(freq == Catch::Approx(0.25).margin(0.02));
  }
  // chi-square uniformity over n+1 = 4 bins, alpha = 0.01 -> critical 11.345
  double expected = draws / 4.0;
  double chi2 = 0;
  for (auto& [r, n] : counts) {
    double diff = n - expected;
    chi2 += diff * diff / expected;
  }
  REQUIRE(chi2 < 11.345);
}

TEST_CASE("n = 0 always yields the base pair") {
  ContextConfig cfg;
  cfg.c0 = 7;
  cfg.r0 = 2;
  cfg.n = 0;
  auto ranges = context_ranges(cfg);
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    auto [c, r] = sample_training_context(ranges, rng);
    REQUIRE(c == 9);
    REQUIRE(r == 2);
  }
}
