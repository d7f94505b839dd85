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

#include <string>
#include <utility>
#include <vector>

#include "tsca/errors.hpp"
#include "tsca/rng.hpp"

namespace tsca {

// Chunking / context hyperparameters, in sub-sampled frame units.
struct ContextConfig {
  long c0 = 10;         // smallest chunk size
  long r0 = 0;          // smallest right context
  long n = 3;           // range size (n+1 pairs total)
  long d_step = 3;      // common difference between consecutive right contexts
  double p = 0.75;      // chunk extension probability
  long l_att = 60;      // attention left context
  long kernel_size = 15;  // depthwise conv kernel width, odd
  double frame_ms = 40.0; // duration of one sub-sampled frame

  long l_conv() const { return (kernel_size - 1) / 2; }

  void validate() const {
    if (c0 < 1) throw InvalidConfig("c0 must be >= 1");
    if (r0 < 0) throw InvalidConfig("r0 must be >= 0");
    if (n < 0) throw InvalidConfig("n must be >= 0");
    if (d_step < 1) throw InvalidConfig("d_step must be >= 1");
    if (p < 0.0 || p > 1.0) throw InvalidConfig("p must be in [0, 1]");
    if (l_att < 0) throw InvalidConfig("l_att must be >= 0");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw InvalidConfig("kernel_size must be odd and >= 1");
    if (frame_ms <= 0.0) throw InvalidConfig("frame_ms must be > 0");
  }
};

// Chunk-size / right-context ranges: r_i = r_{i-1} + d, c_i = c0 + r_i.
struct ContextRanges {
  std::vector<long> chunk_sizes;  // C = [c_0 .. c_n]
  std::vector<long> right_sizes;  // R = [r_0 .. r_n]

  std::size_t size() const { return chunk_sizes.size(); }
};

inline ContextRanges context_ranges(const ContextConfig& cfg) {
  cfg.validate();
  ContextRanges out;
  long r = cfg.r0;
  for (long i = 0; i <= cfg.n; ++i) {
    if (i > 0) r += cfg.d_step;
    long c = cfg.c0 + r;
    if (r >= c)
      throw InvalidConfig("invalid (c, r) pair: r=" + std::to_string(r) +
                          " >= c=" + std::to_string(c));
    out.right_sizes.push_back(r);
    out.chunk_sizes.push_back(c);
  }
  return out;
}

// One uniform draw over the n+1 pairs; index 0 carries the non-overlap case
// whenever r0 = 0. Drawn once per generated mask.
inline std::pair<long, long> sample_training_context(const ContextRanges& ranges,
                                                     Rng& rng) {
  if (ranges.size() == 0) throw InvalidConfig("empty context ranges");
  auto idx = static_cast<std::size_t>(rng.next_below(ranges.size()));
  return {ranges.chunk_sizes[idx], ranges.right_sizes[idx]};
}

}  // namespace tsca
