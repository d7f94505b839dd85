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

#pragma once

#include <cstdint>
#include <random>

namespace tsca {

// Seedable, splittable random source. std::mt19937_64 output is fully
// specified by the standard; the [0,1) and bounded-int mappings below are
// ours, so the whole stream is bit-reproducible across platforms.
// std::uniform_*_distribution is deliberately avoided: its output is
// implementation-defined and would break same-seed mask determinism.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : engine_(splitmix64(seed)), base_seed_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // 53-bit mantissa draw in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_unit() < p; }

  // Uniform integer in [0, n). Lemire-style multiply-shift; the tiny modulo
  // bias (< 2^-32 for our n) is irrelevant here and keeps the draw one-shot.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Independent child stream; children with distinct tags never collide
  // with the parent or each other in practice.
  Rng split(std::uint64_t tag) const {
    std::uint64_t h = splitmix64(base_seed_ ^ (0x9e3779b97f4a7c15ULL + tag));
    return Rng(h, Tagged{});
  }

 private:
  struct Tagged {};
  Rng(std::uint64_t mixed, Tagged) : engine_(mixed), base_seed_(mixed) {}

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  std::uint64_t base_seed_ = 0;
};

}  // namespace tsca
