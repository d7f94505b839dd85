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

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "tsca/context.hpp"
#include "tsca/errors.hpp"
#include "tsca/rng.hpp"

namespace tsca {

// Boolean query-by-key attention mask. Row = query frame, column = key frame.
struct AttnMask {
  long size = 0;
  std::vector<std::uint8_t> allowed;  // row-major size*size

  AttnMask() = default;
  explicit AttnMask(long n) : size(n), allowed(static_cast<std::size_t>(n) * n, 0) {}

  bool at(long q, long k) const {
    return allowed[static_cast<std::size_t>(q) * size + k] != 0;
  }
  void set(long q, long k, bool v) {
    allowed[static_cast<std::size_t>(q) * size + k] = v ? 1 : 0;
  }

  void set_block(long q_begin, long q_end, long k_begin, long k_end) {
    q_begin = std::max(q_begin, 0L);
    k_begin = std::max(k_begin, 0L);
    q_end = std::min(q_end, size);
    k_end = std::min(k_end, size);
    for (long q = q_begin; q < q_end; ++q)
      for (long k = k_begin; k < k_end; ++k) set(q, k, true);
  }

  bool operator==(const AttnMask& o) const {
    return size == o.size && allowed == o.allowed;
  }
};

// Compact per-chunk form of a chunk/DRC mask. This is the canonical
// representation; the dense matrix is derived from it. Column/row ranges are
// already clipped to [0, size).
struct ChunkSpan {
  long row_begin = 0;
  long row_end = 0;  // chunk start + cur_c, clipped
  long col_begin = 0;  // chunk start - l, clipped
  long col_end = 0;    // chunk start + cur_c, clipped
  bool extended = false;
};

struct ChunkLayout {
  long size = 0;
  long l = 0;
  long c = 0;
  long r = 0;
  std::vector<ChunkSpan> spans;

  AttnMask dense() const {
    AttnMask m(size);
    for (const auto& s : spans)
      m.set_block(s.row_begin, s.row_end, s.col_begin, s.col_end);
    return m;
  }

  long extended_count() const {
    long n = 0;
    for (const auto& s : spans) n += s.extended ? 1 : 0;
    return n;
  }
};

// Chunk layout with every chunk at its base width c. Frame i sees
// [max(0, chunk_start - l), chunk_end).
inline ChunkLayout chunk_intervals(long size, long l, long c) {
  if (size < 1) throw InvalidConfig("mask size must be >= 1");
  if (c < 1) throw InvalidConfig("chunk size must be >= 1");
  if (l < 0) throw InvalidConfig("left context must be >= 0");
  ChunkLayout out{size, l, c, 0, {}};
  for (long i = 0; i < size; i += c) {
    ChunkSpan s;
    s.row_begin = i;
    s.row_end = std::min(size, i + c);
    s.col_begin = std::max(0L, i - l);
    s.col_end = std::min(size, i + c);
    s.extended = false;
    out.spans.push_back(s);
  }
  return out;
}

inline AttnMask chunk_mask(long size, long l, long c) {
  return chunk_intervals(size, l, c).dense();
}

// Dynamic right context layout: iterate chunk starts i in steps of c; with
// probability p the chunk widens to c + r. Assignments union; all ranges are
// clipped to the grid. Precondition r < c; r >= l is legal but surfaced to
// the caller via `warn_r_ge_l` since wide right context with narrow left
// context is usually a configuration mistake.
inline ChunkLayout drc_intervals(long size, long l, long c, long r, double p,
                                 Rng& rng, bool* warn_r_ge_l = nullptr) {
  if (size < 1) throw InvalidConfig("mask size must be >= 1");
  if (c < 1) throw InvalidConfig("chunk size must be >= 1");
  if (l < 0) throw InvalidConfig("left context must be >= 0");
  if (r < 0) throw InvalidConfig("right context must be >= 0");
  if (r >= c) throw InvalidConfig("right context must satisfy r < c");
  if (p < 0.0 || p > 1.0) throw InvalidConfig("p must be in [0, 1]");
  if (warn_r_ge_l) *warn_r_ge_l = (r >= l && r > 0);
  ChunkLayout out{size, l, c, r, {}};
  for (long i = 0; i < size; i += c) {
    long cur_c = c;
    bool extended = rng.bernoulli(p);
    if (extended) cur_c = c + r;
    ChunkSpan s;
    s.row_begin = i;
    s.row_end = std::min(size, i + cur_c);
    s.col_begin = std::max(0L, i - l);
    s.col_end = std::min(size, i + cur_c);
    s.extended = extended;
    out.spans.push_back(s);
  }
  return out;
}

inline AttnMask drc_mask(long size, long l, long c, long r, double p, Rng& rng) {
  return drc_intervals(size, l, c, r, p, rng).dense();
}

// Per-step mask over the (l_att + r + c)-wide step window. Window position w
// maps to global frame o - l_att + w. Keys whose global frame falls before
// the stream start (initial padding, present only while o < 0) or at/after
// `real_end` (the zero tail appended by finalize) are masked for every query.
inline AttnMask tsca_step_mask(long o, long c, long r, long l_att,
                               long real_end = -1) {
  if (c < 1) throw InvalidConfig("chunk size must be >= 1");
  if (r < 0 || l_att < 0) throw InvalidConfig("negative context size");
  if (o < -r) throw InvalidOffset("offset below -r");
  long w = l_att + r + c;
  AttnMask m(w);
  for (long k = 0; k < w; ++k) {
    long g = o - l_att + k;
    bool real = g >= 0 && (real_end < 0 || g < real_end);
    if (!real) continue;
    for (long q = 0; q < w; ++q) m.set(q, k, true);
  }
  return m;
}

// --- Export -----------------------------------------------------------------

inline void write_mask_txt(const AttnMask& m, std::ostream& os) {
  for (long q = 0; q < m.size; ++q) {
    for (long k = 0; k < m.size; ++k) os.put(m.at(q, k) ? '1' : '0');
    os.put('\n');
  }
}

// Plain PGM (P2), white = allowed, black = disallowed.
inline void write_mask_pgm(const AttnMask& m, std::ostream& os) {
  os << "P2\n" << m.size << ' ' << m.size << "\n255\n";
  for (long q = 0; q < m.size; ++q) {
    for (long k = 0; k < m.size; ++k) {
      os << (m.at(q, k) ? 255 : 0);
      os.put(k + 1 == m.size ? '\n' : ' ');
    }
  }
}

}  // namespace tsca
