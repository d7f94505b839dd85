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
#include <cmath>
#include <vector>

#include "tsca/conv.hpp"

using namespace tsca;

namespace {

Mat<double> random_mat(long rows, long cols, std::uint64_t seed) {
  Rng rng(seed);
  return Mat<double>::uniform(rows, cols, -1.0, 1.0, rng);
}

double max_abs_diff(const Mat<double>& a, const Mat<double>& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double m = 0;
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      m = std::max(m, std::fabs(a(i, j) - b(i, j)));
  return m;
}

Mat<double> identity_kernel(long channels, long width) {
  Mat<double> k(channels, width, 0.0);
  for (long ch = 0; ch < channels; ++ch) k(ch, (width - 1) / 2) = 1.0;
  return k;
}

// Naive full non-causal depthwise convolution with zero padding.
Mat<double> full_conv(const Mat<double>& x, const Mat<double>& kernel) {
  long l = (kernel.cols() - 1) / 2;
  Mat<double> y(x.rows(), x.cols(), 0.0);
  for (long g = 0; g < x.rows(); ++g)
    for (long ch = 0; ch < x.cols(); ++ch) {
      double acc = 0;
      for (long t = -l; t <= l; ++t) {
        long j = g + t;
        if (j < 0 || j >= x.rows()) continue;
        acc += kernel(ch, t + l) * x(j, ch);
      }
      y(g, ch) = acc;
    }
  return y;
}

}  // namespace

TEST_CASE("segment layout follows the stride-c split") {
  // kernel 15 -> l_conv 7; r = 6 -> r_min = 6; interior segments 23 wide
  auto segs = split_lookahead(30, 10, 6, 7);
  REQUIRE(segs.size() == 3);
  REQUIRE(segs[1].seg_begin == 3);
  REQUIRE(segs[1].seg_end == 26);
  REQUIRE(segs[1].seg_end - segs[1].seg_begin == 23);
  REQUIRE(segs[1].out_begin == 10);
  REQUIRE(segs[1].out_end == 20);
  REQUIRE(segs[2].out_end == 30);

  // r = 0 -> pure causal-with-left-tail segments of length l_conv + c
  auto causal = split_lookahead(30, 10, 0, 7);
  REQUIRE(causal[1].seg_end - causal[1].seg_begin == 17);
  REQUIRE(causal[1].seg_end == causal[1].out_end);

  // kernel 3 -> l_conv 1 caps the lookahead regardless of r
  REQUIRE(conv_rmin(3, 6) == 1);
  auto capped = split_lookahead(30, 10, 6, 1);
  REQUIRE(capped[0].seg_end == 11);
}

TEST_CASE("identity kernel is an exact fixed point") {
  Mat<double> x = random_mat(37, 4, 5);
  for (long kernel_w : {3L, 15L}) {
    Mat<double> y = dcc_forward(x, 10, 3, identity_kernel(4, kernel_w));
    REQUIRE(max_abs_diff(x, y) == 0.0);
  }
}

TEST_CASE("one whole-input chunk with r >= l_conv equals full convolution") {
  Mat<double> x = random_mat(20, 3, 6);
  Mat<double> kernel = random_mat(3, 7, 7);  // l_conv = 3
  Mat<double> y = dcc_forward(x, 20, 3, kernel);
  REQUIRE(max_abs_diff(y, full_conv(x, kernel)) < 1e-15);
}

TEST_CASE("streaming segments equal the offline layout") {
  for (long kernel_w : {3L, 15L}) {
    for (long r : {0L, 3L, 9L}) {
      long c = 10, channels = 4, total = 53;
      Mat<double> x = random_mat(total, channels, 60 + kernel_w + r);
      Mat<double> kernel = random_mat(channels, kernel_w, 70 + kernel_w + r);
      Mat<double> offline = dcc_forward(x, c, r, kernel);

      long l_conv = conv_left(kernel_w);
      long r_min = std::min(l_conv, r);
      ConvCache<double> cache = ConvCache<double>::fresh(l_conv, channels);
      Mat<double> streamed(0, channels);
      for (long i = 0; i < total; i += c) {
        long end = std::min(total, i + c + r_min);
        Mat<double> slice = x.slice_rows(i, end);
        streamed.append_rows(dcc_stream_step(cache, slice, c, kernel));
      }
      REQUIRE(streamed.rows() == total);
      REQUIRE(max_abs_diff(streamed, offline) < 1e-12);
    }
  }
}

TEST_CASE("no output depends on frames beyond its segment reach") {
  long c = 6, r = 4, total = 31, channels = 2, kernel_w = 7;
  long l_conv = conv_left(kernel_w);
  long r_min = std::min(l_conv, r);
  Mat<double> x = random_mat(total, channels, 90);
  Mat<double> kernel = random_mat(channels, kernel_w, 91);
  Mat<double> base = dcc_forward(x, c, r, kernel);
  Rng rng(92);
  for (long probe = 0; probe < total; probe += 3) {
    Mat<double> perturbed = x;
    perturbed(probe, static_cast<long>(rng.next_below(channels))) += 0.5;
    Mat<double> y = dcc_forward(perturbed, c, r, kernel);
    for (long g = 0; g < total; ++g)
      for (long ch = 0; ch < channels; ++ch)
        if (y(g, ch) != base(g, ch)) {
          // legal dependence only: within kernel reach and segment bound
          long seg_end = std::min(total, (g / c) * c + c + r_min);
          REQUIRE(probe >= g - l_conv);
          REQUIRE(probe <= g + l_conv);
          REQUIRE(probe < seg_end);
        }
  }
}

TEST_CASE("unselected segments are truncated at the chunk end") {
  long size = 24, c = 6, r = 3, l = 2;
  long l_conv = 3;
  Mat<double> x = random_mat(size, 2, 100);

  Rng all(1);
  ChunkLayout selected = drc_intervals(size, l, c, r, 1.0, all);
  auto seg_all = masked_right_context(x, selected, l_conv);
  for (std::size_t s = 0; s < seg_all.segments.size(); ++s) {
    const auto& seg = seg_all.segments[s];
    for (long j = seg.seg_begin; j < seg.seg_end; ++j)
      for (long ch = 0; ch < 2; ++ch)
        REQUIRE(seg_all.buffers[s](j - seg.seg_begin, ch) == x(j, ch));
  }

  Rng none(2);
  ChunkLayout unselected = drc_intervals(size, l, c, r, 0.0, none);
  auto seg_none = masked_right_context(x, unselected, l_conv);
  for (std::size_t s = 0; s < seg_none.segments.size(); ++s) {
    const auto& seg = seg_none.segments[s];
    long chunk_end = unselected.spans[s].row_begin + c;
    for (long j = seg.seg_begin; j < seg.seg_end; ++j)
      for (long ch = 0; ch < 2; ++ch) {
        double expect = j < chunk_end ? x(j, ch) : 0.0;
        REQUIRE(seg_none.buffers[s](j - seg.seg_begin, ch) == expect);
      }
  }
}

TEST_CASE("mixed selection matches an interval walk") {
  long size = 40, c = 5, r = 2, l = 3, l_conv = 2;
  Mat<double> x = random_mat(size, 3, 101);
  Rng rng(103);
  ChunkLayout layout = drc_intervals(size, l, c, r, 0.5, rng);
  auto seg = masked_right_context(x, layout, l_conv);
  REQUIRE(seg.segments.size() == layout.spans.size());
  for (std::size_t s = 0; s < seg.segments.size(); ++s) {
    long i = layout.spans[s].row_begin;
    long keep_to = layout.spans[s].extended
                       ? seg.segments[s].seg_end
                       : std::min(seg.segments[s].seg_end, i + c);
    for (long j = seg.segments[s].seg_begin; j < seg.segments[s].seg_end; ++j)
      for (long ch = 0; ch < 3; ++ch) {
        double expect = j < keep_to ? x(j, ch) : 0.0;
        REQUIRE(seg.buffers[s](j - seg.segments[s].seg_begin, ch) == expect);
      }
  }
}

TEST_CASE("two stride-2 stages reduce sixteen frames to four") {
  auto sub = Subsampler<double>::seeded(5, 6, Rng(7));
  Mat<double> x = random_mat(16, 5, 8);
  Mat<double> y = sub.offline(x);
  REQUIRE(y.rows() == 4);
  REQUIRE(y.cols() == 6);
}

TEST_CASE("constant input gives constant interior output") {
  auto sub = Subsampler<double>::seeded(3, 4, Rng(9));
  Mat<double> x(24, 3);
  for (long i = 0; i < 24; ++i)
    for (long f = 0; f < 3; ++f) x(i, f) = 0.4 * static_cast<double>(f) - 0.2;
  Mat<double> y = sub.offline(x);
  // frame k sees raw [4k-6, 4k]; interior once 4k-6 >= 0
  for (long k = 2; k < y.rows(); ++k)
    for (long f = 0; f < 4; ++f) REQUIRE(y(k, f) == Catch::Approx(y(2, f)));
}

TEST_CASE("output frame k is anchored at input time 4k") {
  auto sub = Subsampler<double>::seeded(2, 3, Rng(10));
  Mat<double> base(32, 2, 0.25);
  Mat<double> probe = base;
  probe(16, 0) += 1.0;  // raw frame 16 -> anchors sub frame 4
  Mat<double> yb = sub.offline(base);
  Mat<double> yp = sub.offline(probe);
  for (long k = 0; k < yb.rows(); ++k) {
    bool touched = false;
    for (long f = 0; f < 3; ++f) touched = touched || yb(k, f) != yp(k, f);
    // raw j feeds sub frames k with 4k-6 <= j <= 4k: j=16 -> k in {4, 5}
    if (touched) {
      REQUIRE(k >= 4);
      REQUIRE(k <= 5);
    }
    if (k == 4) REQUIRE(touched);
  }
}

TEST_CASE("streamed sub-sampling equals the offline pass bit for bit") {
  auto sub = Subsampler<double>::seeded(4, 5, Rng(11));
  Mat<double> x = random_mat(48, 4, 12);
  Mat<double> offline = sub.offline(x);
  SubsampleState<double> st = SubsampleState<double>::fresh(4, 5);
  Mat<double> streamed(0, 5);
  for (long i = 0; i < 48; i += 16)
    streamed.append_rows(subsample_step(sub, st, x.slice_rows(i, i + 16)));
  REQUIRE(streamed == offline);
  REQUIRE_THROWS_AS(subsample_step(sub, st, x.slice_rows(0, 3)),
                    ChunkSizeMismatch);
}

TEST_CASE("conv validation errors") {
  REQUIRE_THROWS_AS(conv_left(4), InvalidConfig);
  REQUIRE_THROWS_AS(split_lookahead(10, 0, 1, 2), InvalidConfig);
  Mat<double> x = random_mat(8, 2, 13);
  Mat<double> bad_kernel = random_mat(3, 3, 14);  // channel mismatch
  REQUIRE_THROWS_AS(dcc_forward(x, 4, 1, bad_kernel), ShapeMismatch);
}
