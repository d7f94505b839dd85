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
#include <functional>
#include <vector>

#include "tsca/errors.hpp"
#include "tsca/mask.hpp"
#include "tsca/mat.hpp"

namespace tsca {

inline long conv_left(long kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw InvalidConfig("kernel_size must be odd and >= 1");
  return (kernel_size - 1) / 2;
}

inline long conv_rmin(long kernel_size, long r) {
  return std::min(conv_left(kernel_size), r);
}

// One convolution segment: input rows [seg_begin, seg_end) feed the valid
// output rows [out_begin, out_end).
struct ConvSegment {
  long seg_begin = 0;
  long seg_end = 0;
  long out_begin = 0;
  long out_end = 0;
};

enum class DccMode { kChunkedC, kChunkedCPlusR };

// Segments of length l_conv + c + r_min with stride c; each segment's valid
// output range is exactly its stride frames. kChunkedCPlusR widens the
// decoding chunk to c + r_min (stride and output range follow) and is kept
// only for comparing the two decoding layouts.
inline std::vector<ConvSegment> split_lookahead(long total, long c, long r,
                                                long l_conv,
                                                DccMode mode = DccMode::kChunkedC) {
  if (total < 0) throw InvalidConfig("negative frame count");
  if (c < 1) throw InvalidConfig("chunk size must be >= 1");
  if (r < 0 || l_conv < 0) throw InvalidConfig("negative context size");
  long r_min = std::min(l_conv, r);
  long stride = (mode == DccMode::kChunkedC) ? c : c + r_min;
  long look = (mode == DccMode::kChunkedC) ? r_min : 0;
  std::vector<ConvSegment> segs;
  for (long i = 0; i < total; i += stride) {
    ConvSegment s;
    s.out_begin = i;
    s.out_end = std::min(total, i + stride);
    s.seg_begin = std::max(0L, i - l_conv);
    s.seg_end = std::min(total, s.out_end + look);
    segs.push_back(s);
  }
  return segs;
}

// Depthwise taps for one output frame. `at(j, ch)` must return the input
// value at global frame j or zero where the layout forbids it. Taps walk
// ascending so streaming and offline evaluations sum in the same order.
template <class S, class At>
inline void depthwise_row(const Mat<S>& kernel, long g, long l_conv, At&& at,
                          S* out) {
  long ch_n = kernel.rows();
  for (long ch = 0; ch < ch_n; ++ch) {
    S acc = S(0);
    for (long t = -l_conv; t <= l_conv; ++t)
      acc += kernel(ch, t + l_conv) * at(g + t, ch);
    out[ch] = acc;
  }
}

// Offline dynamic chunk convolution: depthwise kernel (channels x width), one
// pass over the segment layout. History crosses chunk boundaries; future
// frames are visible only up to the segment end, zeros beyond.
template <class S>
inline Mat<S> dcc_forward(const Mat<S>& x, long c, long r, const Mat<S>& kernel,
                          DccMode mode = DccMode::kChunkedC) {
  long l_conv = conv_left(kernel.cols());
  if (kernel.rows() != x.cols()) throw ShapeMismatch("dcc_forward: channel count");
  auto segs = split_lookahead(x.rows(), c, r, l_conv, mode);
  Mat<S> y(x.rows(), x.cols());
  for (const auto& seg : segs) {
    auto at = [&](long j, long ch) -> S {
      if (j < 0 || j >= x.rows()) return S(0);
      if (j >= seg.seg_end) return S(0);  // lookahead stops at the segment
      return x(j, ch);
    };
    for (long g = seg.out_begin; g < seg.out_end; ++g)
      depthwise_row(kernel, g, l_conv, at, y.row(g));
  }
  return y;
}

// Streaming state: the last l_conv input frames before the next chunk,
// zero-padded before stream start.
template <class S>
struct ConvCache {
  Mat<S> left_tail;   // l_conv x channels
  long position = 0;  // global frame of the first tail row

  static ConvCache fresh(long l_conv, long channels) {
    ConvCache c;
    c.left_tail = Mat<S>(l_conv, channels, S(0));
    c.position = -l_conv;
    return c;
  }
};

// One streaming DCC step for the chunk starting at cache.position + l_conv.
// `chunk_and_lookahead` holds the chunk's c frames plus however many of its
// r_min lookahead frames have arrived (fewer near stream end). Returns
// outputs for the c chunk frames and rolls the tail forward by c.
template <class S>
inline Mat<S> dcc_stream_step(ConvCache<S>& cache, const Mat<S>& chunk_and_lookahead,
                              long c, const Mat<S>& kernel) {
  long l_conv = conv_left(kernel.cols());
  if (cache.left_tail.rows() != l_conv) throw CacheDesync("conv tail width");
  if (chunk_and_lookahead.cols() != kernel.rows())
    throw ShapeMismatch("dcc_stream_step: channel count");
  long chunk_begin = cache.position + l_conv;
  long have = chunk_and_lookahead.rows();
  long out_n = std::min(c, have);
  Mat<S> y(out_n, kernel.rows());
  auto at = [&](long j, long ch) -> S {
    long rel = j - chunk_begin;
    if (rel >= 0) return rel < have ? chunk_and_lookahead(rel, ch) : S(0);
    long trel = j - cache.position;
    return trel >= 0 ? cache.left_tail(trel, ch) : S(0);
  };
  for (long g = chunk_begin; g < chunk_begin + out_n; ++g)
    depthwise_row(kernel, g, l_conv, at, y.row(g - chunk_begin));

  // New tail: the last l_conv frames before the next chunk.
  Mat<S> tail(l_conv, kernel.rows(), S(0));
  for (long j = chunk_begin + c - l_conv; j < chunk_begin + c; ++j) {
    long row = j - (chunk_begin + c - l_conv);
    long rel = j - chunk_begin;
    for (long ch = 0; ch < kernel.rows(); ++ch)
      tail(row, ch) = rel >= 0 ? (rel < have ? chunk_and_lookahead(rel, ch) : S(0))
                               : at(j, ch);
  }
  cache.left_tail = tail;
  cache.position += c;
  return y;
}

// Per-segment input views for DRC-masked convolution: segments not selected
// for extension have the frames beyond their chunk end zeroed inside their
// window. Selection flags come from the mask layout's compact form.
template <class S>
struct SegmentedInput {
  std::vector<ConvSegment> segments;
  std::vector<Mat<S>> buffers;  // one (seg_end - seg_begin) x channels view each
};

template <class S>
inline SegmentedInput<S> masked_right_context(const Mat<S>& x,
                                              const ChunkLayout& layout,
                                              long l_conv) {
  long r_min = std::min(l_conv, layout.r);
  SegmentedInput<S> out;
  for (const auto& span : layout.spans) {
    long i = span.row_begin;
    ConvSegment seg;
    seg.out_begin = i;
    seg.out_end = std::min(layout.size, i + layout.c);
    seg.seg_begin = std::max(0L, i - l_conv);
    seg.seg_end = std::min(layout.size, i + layout.c + r_min);
    Mat<S> buf(seg.seg_end - seg.seg_begin, x.cols(), S(0));
    long keep_to = span.extended ? seg.seg_end : std::min(seg.seg_end, i + layout.c);
    for (long j = seg.seg_begin; j < keep_to; ++j)
      for (long ch = 0; ch < x.cols(); ++ch) buf(j - seg.seg_begin, ch) = x(j, ch);
    out.segments.push_back(seg);
    out.buffers.push_back(std::move(buf));
  }
  return out;
}

// --- Sub-sampling front end -----------------------------------------------------

// One stride-2 stage: y_t = relu(W * [x_{2t-2}; x_{2t-1}; x_{2t}] + b), frames
// before the stream zero-padded. Two stages give the 4x frame-rate reduction.
template <class S>
struct SubsampleStage {
  Mat<S> w;           // d_out x (3 * d_in)
  std::vector<S> b;   // d_out

  long d_in() const { return w.cols() / 3; }
  long d_out() const { return w.rows(); }

  static SubsampleStage seeded(long d_in, long d_out, Rng rng) {
    SubsampleStage s;
    S bound = static_cast<S>(1.0 / std::sqrt(static_cast<double>(3 * d_in)));
    Rng cw = rng.split(1), cb = rng.split(2);
    s.w = Mat<S>::uniform(d_out, 3 * d_in, -bound, bound, cw);
    s.b.resize(d_out);
    for (auto& v : s.b) v = static_cast<S>(cb.next_range(-bound, bound));
    return s;
  }

  // `tail` holds the 2 frames before `x` (zeros at stream start) and is
  // rolled forward; x must have an even row count for exact 2x reduction.
  Mat<S> apply(const Mat<S>& x, Mat<S>* tail = nullptr) const {
    long din = d_in();
    if (x.cols() != din) throw ShapeMismatch("subsample: feature dim");
    Mat<S> local_tail = tail ? *tail : Mat<S>(2, din, S(0));
    long t_out = (x.rows() + 1) / 2;
    Mat<S> y(t_out, d_out());
    std::vector<S> cat(static_cast<std::size_t>(3 * din));
    auto at = [&](long j, long f) -> S {
      if (j >= 0) return x(j, f);
      return j >= -2 ? local_tail(j + 2, f) : S(0);
    };
    for (long t = 0; t < t_out; ++t) {
      for (long tap = 0; tap < 3; ++tap)
        for (long f = 0; f < din; ++f) cat[tap * din + f] = at(2 * t - 2 + tap, f);
      apply_rowvec(w, cat.data(), y.row(t));
      for (long f = 0; f < d_out(); ++f) {
        y(t, f) += b[f];
        if (y(t, f) < S(0)) y(t, f) = S(0);
      }
    }
    if (tail) {
      for (long j = 0; j < 2; ++j)
        for (long f = 0; f < din; ++f) (*tail)(j, f) = at(x.rows() - 2 + j, f);
    }
    return y;
  }
};

template <class S>
struct Subsampler {
  SubsampleStage<S> stage1;
  SubsampleStage<S> stage2;

  static Subsampler seeded(long d_feat, long d_model, Rng rng) {
    Subsampler s;
    s.stage1 = SubsampleStage<S>::seeded(d_feat, d_model, rng.split(1));
    s.stage2 = SubsampleStage<S>::seeded(d_model, d_model, rng.split(2));
    return s;
  }

  // Full-sequence: T raw frames -> ceil(ceil(T/2)/2) frames; output frame k
  // is anchored at input time 4k (a 40 ms shift for a 10 ms frame hop).
  Mat<S> offline(const Mat<S>& x) const {
    return stage2.apply(stage1.apply(x));
  }
};

template <class S>
struct SubsampleState {
  Mat<S> tail1;  // 2 x d_feat
  Mat<S> tail2;  // 2 x d_model

  static SubsampleState fresh(long d_feat, long d_model) {
    SubsampleState s;
    s.tail1 = Mat<S>(2, d_feat, S(0));
    s.tail2 = Mat<S>(2, d_model, S(0));
    return s;
  }
};

// Streaming: 4n raw frames in, n sub-sampled frames out, bit-identical to the
// offline pass over the concatenated input.
template <class S>
inline Mat<S> subsample_step(const Subsampler<S>& sub, SubsampleState<S>& state,
                             const Mat<S>& raw) {
  if (raw.rows() % 4 != 0)
    throw ChunkSizeMismatch("subsample chunks must hold a multiple of 4 raw frames");
  Mat<S> mid = sub.stage1.apply(raw, &state.tail1);
  return sub.stage2.apply(mid, &state.tail2);
}

}  // namespace tsca
