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
#include <limits>
#include <vector>

#include "tsca/attention.hpp"
#include "tsca/conv.hpp"
#include "tsca/errors.hpp"
#include "tsca/mask.hpp"
#include "tsca/mat.hpp"

namespace tsca {

enum class Precision { kSingle, kDouble };

struct EncoderConfig {
  long layers = 4;
  long d_model = 64;
  long heads = 2;
  long ffn_dim = 256;
  long kernel_size = 15;
  long vocab_size = 32;  // includes the blank, id 0
  long d_feat = 80;
  bool use_subsample = false;
  Precision precision = Precision::kDouble;
  double ln_eps = 1e-5;

  long l_conv() const { return (kernel_size - 1) / 2; }

  void validate() const {
    if (layers < 1) throw InvalidConfig("layers must be >= 1");
    if (d_model < 1 || heads < 1 || d_model % heads != 0)
      throw InvalidConfig("d_model must be a positive multiple of heads");
    if (ffn_dim < 1) throw InvalidConfig("ffn_dim must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw InvalidConfig("kernel_size must be odd and >= 1");
    if (vocab_size < 2) throw InvalidConfig("vocab must hold blank plus one token");
    if (d_feat < 1) throw InvalidConfig("d_feat must be >= 1");
  }
};

// --- Weights -----------------------------------------------------------------

template <class S>
struct LayerNormParams {
  std::vector<S> gamma;
  std::vector<S> beta;

  static LayerNormParams identity(long d) {
    LayerNormParams p;
    p.gamma.assign(static_cast<std::size_t>(d), S(1));
    p.beta.assign(static_cast<std::size_t>(d), S(0));
    return p;
  }
};

template <class S>
struct FfnWeights {
  Mat<S> w1;  // ffn x d
  std::vector<S> b1;
  Mat<S> w2;  // d x ffn
  std::vector<S> b2;
};

template <class S>
struct ConvBlockWeights {
  Mat<S> pw1;  // 2d x d
  std::vector<S> pb1;
  Mat<S> dw;   // d x kernel
  LayerNormParams<S> ln;
  Mat<S> pw2;  // d x d
  std::vector<S> pb2;
};

template <class S>
struct BlockWeights {
  LayerNormParams<S> ln1;
  FfnWeights<S> ffn1;
  LayerNormParams<S> ln2;
  RelPosParams<S> attn;
  LayerNormParams<S> ln3;
  ConvBlockWeights<S> conv;
  LayerNormParams<S> ln4;
  FfnWeights<S> ffn2;
  LayerNormParams<S> ln_out;
};

template <class S>
struct EncoderWeights {
  EncoderConfig cfg;
  Mat<S> w_in;  // d x d_feat, used when the sub-sampling front is off
  std::vector<S> b_in;
  Subsampler<S> sub;
  std::vector<BlockWeights<S>> blocks;
  LayerNormParams<S> after_norm;
  Mat<S> w_ctc;  // vocab x d
  std::vector<S> b_ctc;

  static EncoderWeights seeded(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    EncoderWeights w;
    w.cfg = cfg;
    Rng root(seed);
    std::uint64_t tag = 1;
    long d = cfg.d_model;
    S bd = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d)));
    auto mat = [&](long rows, long cols, S bound) {
      Rng child = root.split(tag++);
      return Mat<S>::uniform(rows, cols, -bound, bound, child);
    };
    auto vec = [&](long n, S bound) {
      Rng child = root.split(tag++);
      std::vector<S> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = static_cast<S>(child.next_range(-bound, bound));
      return v;
    };
    if (cfg.use_subsample) {
      w.sub = Subsampler<S>::seeded(cfg.d_feat, d, root.split(tag++));
    } else {
      S bf = static_cast<S>(1.0 / std::sqrt(static_cast<double>(cfg.d_feat)));
      w.w_in = mat(d, cfg.d_feat, bf);
      w.b_in = vec(d, bf);
    }
    S bffn = static_cast<S>(1.0 / std::sqrt(static_cast<double>(cfg.ffn_dim)));
    for (long layer = 0; layer < cfg.layers; ++layer) {
      BlockWeights<S> b;
      b.ln1 = LayerNormParams<S>::identity(d);
      b.ffn1 = FfnWeights<S>{mat(cfg.ffn_dim, d, bd), vec(cfg.ffn_dim, bd),
                             mat(d, cfg.ffn_dim, bffn), vec(d, bffn)};
      b.ln2 = LayerNormParams<S>::identity(d);
      b.attn = RelPosParams<S>::seeded(d, cfg.heads, 0, 0, root.split(tag++));
      b.ln3 = LayerNormParams<S>::identity(d);
      b.conv = ConvBlockWeights<S>{mat(2 * d, d, bd), vec(2 * d, bd),
                                   mat(d, cfg.kernel_size, bd),
                                   LayerNormParams<S>::identity(d),
                                   mat(d, d, bd), vec(d, bd)};
      b.ln4 = LayerNormParams<S>::identity(d);
      b.ffn2 = FfnWeights<S>{mat(cfg.ffn_dim, d, bd), vec(cfg.ffn_dim, bd),
                             mat(d, cfg.ffn_dim, bffn), vec(d, bffn)};
      b.ln_out = LayerNormParams<S>::identity(d);
      w.blocks.push_back(std::move(b));
    }
    w.after_norm = LayerNormParams<S>::identity(d);
    w.w_ctc = mat(cfg.vocab_size, d, bd);
    w.b_ctc = vec(cfg.vocab_size, bd);
    return w;
  }

  // Declare relative-distance coverage on every layer. Call once before
  // sharing the weights across sessions; widening changes no row content.
  void ensure_rel_coverage(long dmin, long dmax) {
    for (auto& b : blocks) b.attn.ensure_coverage(dmin, dmax);
  }
};

// --- Per-frame primitives ------------------------------------------------------

template <class S>
inline void ln_row(const S* x, const LayerNormParams<S>& p, double eps, long d,
                   S* y) {
  S mean = S(0);
  for (long i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<S>(d);
  S var = S(0);
  for (long i = 0; i < d; ++i) {
    S dx = x[i] - mean;
    var += dx * dx;
  }
  var /= static_cast<S>(d);
  S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
  for (long i = 0; i < d; ++i) y[i] = p.gamma[i] * ((x[i] - mean) * inv) + p.beta[i];
}

template <class S>
inline Mat<S> ln_rows(const Mat<S>& x, const LayerNormParams<S>& p, double eps) {
  Mat<S> y(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) ln_row(x.row(i), p, eps, x.cols(), y.row(i));
  return y;
}

template <class S>
inline S silu(S x) {
  return x / (S(1) + std::exp(-x));
}

// w2 * silu(w1 * x + b1) + b2 for one frame.
template <class S>
inline void ffn_row(const S* x, const FfnWeights<S>& f, S* y,
                    std::vector<S>& scratch) {
  long hidden = f.w1.rows();
  scratch.resize(static_cast<std::size_t>(hidden));
  apply_rowvec(f.w1, x, scratch.data());
  for (long i = 0; i < hidden; ++i) scratch[i] = silu(scratch[i] + f.b1[i]);
  apply_rowvec(f.w2, scratch.data(), y);
  for (long i = 0; i < f.w2.rows(); ++i) y[i] += f.b2[i];
}

// Pointwise expansion + gated linear unit for one frame: 2d -> d.
template <class S>
inline void glu_row(const S* x, const ConvBlockWeights<S>& c, S* y,
                    std::vector<S>& scratch) {
  long d2 = c.pw1.rows();
  long d = d2 / 2;
  scratch.resize(static_cast<std::size_t>(d2));
  apply_rowvec(c.pw1, x, scratch.data());
  for (long i = 0; i < d2; ++i) scratch[i] += c.pb1[i];
  for (long i = 0; i < d; ++i) {
    S gate = S(1) / (S(1) + std::exp(-scratch[d + i]));
    y[i] = scratch[i] * gate;
  }
}

// --- Layouts ----------------------------------------------------------------------

// Per-frame attention interval plus the convolution lookahead bound, both in
// global frame indices.
struct FrameWindows {
  std::vector<KeyRange> attn;
  std::vector<long> conv_hi;

  long size() const { return static_cast<long>(attn.size()); }
};

// Interval view of a mask: each row must be contiguous. The convolution
// lookahead reaches r_min frames but never past the row's attention bound.
inline FrameWindows windows_from_mask(const AttnMask& m, long r_min) {
  FrameWindows w;
  for (long q = 0; q < m.size; ++q) {
    long lo = -1, hi = -1;
    for (long k = 0; k < m.size; ++k) {
      if (!m.at(q, k)) continue;
      if (lo < 0) lo = k;
      hi = k;
    }
    if (lo < 0) throw InvalidConfig("mask row " + std::to_string(q) + " is empty");
    for (long k = lo; k <= hi; ++k)
      if (!m.at(q, k))
        throw InvalidConfig("mask row " + std::to_string(q) + " is not an interval");
    w.attn.push_back(KeyRange{lo, hi});
    w.conv_hi.push_back(std::min(q + r_min, hi));
  }
  return w;
}

inline FrameWindows windows_full(long t, long r_min) {
  FrameWindows w;
  for (long q = 0; q < t; ++q) {
    w.attn.push_back(KeyRange{0, t - 1});
    w.conv_hi.push_back(std::min(q + r_min, t - 1));
  }
  return w;
}

// --- Offline forward -----------------------------------------------------------------

namespace detail {

// One block over the full sequence with per-frame windows.
template <class S>
inline Mat<S> block_offline(const Mat<S>& x, const FrameWindows& win,
                            const BlockWeights<S>& bw, const EncoderConfig& cfg) {
  long t = x.rows(), d = cfg.d_model;
  std::vector<S> scratch, tmp(static_cast<std::size_t>(std::max(d, cfg.ffn_dim)));
  Mat<S> cur = x;

  // half-step feed-forward
  for (long i = 0; i < t; ++i) {
    ln_row(cur.row(i), bw.ln1, cfg.ln_eps, d, tmp.data());
    std::vector<S> out(static_cast<std::size_t>(d));
    ffn_row(tmp.data(), bw.ffn1, out.data(), scratch);
    for (long f = 0; f < d; ++f) cur(i, f) += S(0.5) * out[f];
  }

  // attention
  {
    Mat<S> attn_in = ln_rows(cur, bw.ln2, cfg.ln_eps);
    Mat<S> z = attention_forward(attn_in, win.attn, bw.attn);
    for (long i = 0; i < t; ++i)
      for (long f = 0; f < d; ++f) cur(i, f) += z(i, f);
  }

  // convolution: pointwise+GLU, bounded depthwise, norm, swish, pointwise
  {
    Mat<S> conv_in = ln_rows(cur, bw.ln3, cfg.ln_eps);
    Mat<S> u(t, d);
    for (long i = 0; i < t; ++i) glu_row(conv_in.row(i), bw.conv, u.row(i), scratch);
    long l_conv = cfg.l_conv();
    Mat<S> dwout(t, d);
    for (long g = 0; g < t; ++g) {
      long hi = win.conv_hi[static_cast<std::size_t>(g)];
      auto at = [&](long j, long ch) -> S {
        if (j < 0 || j >= t || j > hi) return S(0);
        return u(j, ch);
      };
      depthwise_row(bw.conv.dw, g, l_conv, at, dwout.row(g));
    }
    for (long i = 0; i < t; ++i) {
      ln_row(dwout.row(i), bw.conv.ln, cfg.ln_eps, d, tmp.data());
      for (long f = 0; f < d; ++f) tmp[static_cast<std::size_t>(f)] =
          silu(tmp[static_cast<std::size_t>(f)]);
      std::vector<S> out(static_cast<std::size_t>(d));
      apply_rowvec(bw.conv.pw2, tmp.data(), out.data());
      for (long f = 0; f < d; ++f) cur(i, f) += out[f] + bw.conv.pb2[f];
    }
  }

  // half-step feed-forward, then block norm
  for (long i = 0; i < t; ++i) {
    ln_row(cur.row(i), bw.ln4, cfg.ln_eps, d, tmp.data());
    std::vector<S> out(static_cast<std::size_t>(d));
    ffn_row(tmp.data(), bw.ffn2, out.data(), scratch);
    for (long f = 0; f < d; ++f) cur(i, f) += S(0.5) * out[f];
  }
  return ln_rows(cur, bw.ln_out, cfg.ln_eps);
}

template <class S>
inline Mat<S> front_offline(const Mat<S>& feats, const EncoderWeights<S>& w) {
  if (w.cfg.use_subsample) return w.sub.offline(feats);
  if (feats.cols() != w.cfg.d_feat) throw ShapeMismatch("front: feature dim");
  Mat<S> x = project_rows(feats, w.w_in);
  for (long i = 0; i < x.rows(); ++i)
    for (long f = 0; f < x.cols(); ++f) x(i, f) += w.b_in[static_cast<std::size_t>(f)];
  return x;
}

template <class S>
inline Mat<S> ctc_head(const Mat<S>& x, const EncoderWeights<S>& w) {
  Mat<S> normed = ln_rows(x, w.after_norm, w.cfg.ln_eps);
  Mat<S> logits = project_rows(normed, w.w_ctc);
  for (long i = 0; i < logits.rows(); ++i)
    for (long v = 0; v < logits.cols(); ++v)
      logits(i, v) += w.b_ctc[static_cast<std::size_t>(v)];
  return logits;
}

}  // namespace detail

// Deterministic full-sequence forward under a per-frame layout. Serves as the
// oracle target for streaming runs. Windows are given in sub-sampled frames.
template <class S>
inline Mat<S> forward_offline(const Mat<S>& feats, const FrameWindows& win,
                              const EncoderWeights<S>& w) {
  Mat<S> x = detail::front_offline(feats, w);
  if (win.size() != x.rows())
    throw ShapeMismatch("forward_offline: layout covers " +
                        std::to_string(win.size()) + " frames, input has " +
                        std::to_string(x.rows()));
  for (const auto& bw : w.blocks) x = detail::block_offline(x, win, bw, w.cfg);
  return detail::ctc_head(x, w);
}

template <class S>
inline Mat<S> forward_offline(const Mat<S>& feats, const AttnMask& mask,
                              const EncoderWeights<S>& w, long r = 0) {
  return forward_offline(feats, windows_from_mask(mask, conv_rmin(w.cfg.kernel_size, r)), w);
}

// --- Streaming forward ------------------------------------------------------------------

template <class S>
struct LayerState {
  Mat<S> k_rows;  // cached K for globals [attn_from, o)
  Mat<S> v_rows;
  long attn_from = 0;
  Mat<S> conv_tail;  // post-GLU values for globals [o - l_conv, o)
};

template <class S>
struct EncoderState {
  long o = 0;  // next step offset
  long step = 0;
  Mat<S> front_tail;  // last r encoder-frame inputs, zeros at start
  SubsampleState<S> sub;
  std::vector<LayerState<S>> layers;

  static EncoderState fresh(const EncoderWeights<S>& w, const StepGeom& g) {
    g.validate();
    EncoderState st;
    st.o = -g.r;
    st.front_tail = Mat<S>(g.r, w.cfg.d_model, S(0));
    if (w.cfg.use_subsample)
      st.sub = SubsampleState<S>::fresh(w.cfg.d_feat, w.cfg.d_model);
    for (long i = 0; i < w.cfg.layers; ++i) {
      LayerState<S> ls;
      ls.k_rows = Mat<S>(0, w.cfg.d_model);
      ls.v_rows = Mat<S>(0, w.cfg.d_model);
      ls.attn_from = -g.r;
      ls.conv_tail = Mat<S>(w.cfg.l_conv(), w.cfg.d_model, S(0));
      st.layers.push_back(std::move(ls));
    }
    return st;
  }
};

template <class S>
struct StepLogits {
  Mat<S> final_logits;  // frames [o, o+c)
  Mat<S> prov_logits;   // frames [o+c, o+c+r)
  long window_width = 0;
};

namespace detail {

// One block over the step window [o, o + r + c). A frame's final value may
// depend only on frames already final this step, so final queries stop at the
// last final key while in-context-future queries see the whole window; that
// keeps every emitted final bit-consistent with the offline layout. real_end
// (when >= 0) marks the end of the stream: later frames are masked zeros.
template <class S>
inline Mat<S> block_step(const Mat<S>& x, LayerState<S>& ls, long o,
                         const StepGeom& g, long real_end,
                         const BlockWeights<S>& bw, const EncoderConfig& cfg,
                         long* width_out) {
  long n = g.r + g.c;
  long d = cfg.d_model;
  long re = real_end >= 0 ? real_end : std::numeric_limits<long>::max();
  std::vector<S> scratch, tmp(static_cast<std::size_t>(std::max(d, cfg.ffn_dim)));
  Mat<S> cur = x;

  for (long i = 0; i < n; ++i) {
    ln_row(cur.row(i), bw.ln1, cfg.ln_eps, d, tmp.data());
    std::vector<S> out(static_cast<std::size_t>(d));
    ffn_row(tmp.data(), bw.ffn1, out.data(), scratch);
    for (long f = 0; f < d; ++f) cur(i, f) += S(0.5) * out[f];
  }

  {
    Mat<S> attn_in = ln_rows(cur, bw.ln2, cfg.ln_eps);
    Mat<S> qp = project_rows(attn_in, bw.attn.w_q);
    Mat<S> kp_win = project_rows(attn_in, bw.attn.w_k);
    Mat<S> vp_win = project_rows(attn_in, bw.attn.w_v);
    Mat<S> kp = ls.k_rows;
    kp.append_rows(kp_win);
    Mat<S> vp = ls.v_rows;
    vp.append_rows(vp_win);
    long n_cache = ls.k_rows.rows();
    long k_global0 = o - n_cache;
    if (n_cache > 0 && ls.attn_from != k_global0)
      throw CacheDesync("attention cache anchored at " +
                        std::to_string(ls.attn_from) + ", expected " +
                        std::to_string(k_global0));
    if (width_out) *width_out = kp.rows();

    long lo_g = std::max(0L, o - g.l_att);
    long last_final_g = std::min(o + g.c - 1, re - 1);
    long last_any_g = std::min(o + n - 1, re - 1);
    std::vector<KeyRange> win(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      long gframe = o + i;
      bool is_final = i < g.c && gframe >= 0 && gframe < re;
      long hi_g = is_final ? last_final_g : last_any_g;
      win[static_cast<std::size_t>(i)] =
          KeyRange{lo_g - k_global0, hi_g - k_global0};
    }
    long dmax = (o + n - 1) - lo_g;
    long dmin = o - last_any_g;
    ProjectedRel<S> rp = project_rel_range(bw.attn, dmin, dmax);
    Mat<S> z = mha_from_projected(qp, kp, vp, o, k_global0, win, rp, bw.attn);
    for (long i = 0; i < n; ++i)
      for (long f = 0; f < d; ++f) cur(i, f) += z(i, f);

    // Freeze K/V of the final region for the next step's left context.
    long next_o = o + g.c;
    long keep_from = std::max(0L, next_o - g.l_att);
    ls.k_rows = kp.slice_rows(keep_from - k_global0, next_o - k_global0);
    ls.v_rows = vp.slice_rows(keep_from - k_global0, next_o - k_global0);
    ls.attn_from = keep_from;
  }

  {
    Mat<S> conv_in = ln_rows(cur, bw.ln3, cfg.ln_eps);
    Mat<S> u(n, d);
    for (long i = 0; i < n; ++i) glu_row(conv_in.row(i), bw.conv, u.row(i), scratch);
    long l_conv = cfg.l_conv();
    long r_min = std::min(l_conv, g.r);
    long last_final_g = std::min(o + g.c - 1, re - 1);
    long last_any_g = std::min(o + n - 1, re - 1);
    Mat<S> dwout(n, d);
    for (long i = 0; i < n; ++i) {
      long gframe = o + i;
      bool is_final = i < g.c && gframe >= 0 && gframe < re;
      long hi = std::min(gframe + r_min, is_final ? last_final_g : last_any_g);
      auto at = [&](long j, long ch) -> S {
        if (j < 0 || j > hi) return S(0);
        if (j >= o) return j < o + n ? u(j - o, ch) : S(0);
        long trel = j - (o - l_conv);
        return trel >= 0 ? ls.conv_tail(trel, ch) : S(0);
      };
      depthwise_row(bw.conv.dw, gframe, l_conv, at, dwout.row(i));
    }
    for (long i = 0; i < n; ++i) {
      ln_row(dwout.row(i), bw.conv.ln, cfg.ln_eps, d, tmp.data());
      for (long f = 0; f < d; ++f) tmp[static_cast<std::size_t>(f)] =
          silu(tmp[static_cast<std::size_t>(f)]);
      std::vector<S> out(static_cast<std::size_t>(d));
      apply_rowvec(bw.conv.pw2, tmp.data(), out.data());
      for (long f = 0; f < d; ++f) cur(i, f) += out[f] + bw.conv.pb2[f];
    }

    // Roll the conv tail to cover [o + c - l_conv, o + c); frames before the
    // stream stay zero so the layout matches the offline zero padding.
    Mat<S> tail(l_conv, d, S(0));
    for (long j = o + g.c - l_conv; j < o + g.c; ++j) {
      long row = j - (o + g.c - l_conv);
      if (j < 0) continue;
      if (j >= o) {
        for (long f = 0; f < d; ++f) tail(row, f) = u(j - o, f);
      } else {
        long trel = j - (o - l_conv);
        if (trel >= 0)
          for (long f = 0; f < d; ++f) tail(row, f) = ls.conv_tail(trel, f);
      }
    }
    ls.conv_tail = std::move(tail);
  }

  for (long i = 0; i < n; ++i) {
    ln_row(cur.row(i), bw.ln4, cfg.ln_eps, d, tmp.data());
    std::vector<S> out(static_cast<std::size_t>(d));
    ffn_row(tmp.data(), bw.ffn2, out.data(), scratch);
    for (long f = 0; f < d; ++f) cur(i, f) += S(0.5) * out[f];
  }
  return ln_rows(cur, bw.ln_out, cfg.ln_eps);
}

}  // namespace detail

// One streaming step: front end, every block with jointly advancing caches,
// CTC head. Returns final logits for [o, o+c) and provisional logits for
// [o+c, o+c+r); callers clip frames outside [0, real_end).
template <class S>
inline StepLogits<S> forward_step(const Mat<S>& chunk, EncoderState<S>& st,
                                  const EncoderWeights<S>& w, const StepGeom& g,
                                  long real_end = -1) {
  g.validate();
  const EncoderConfig& cfg = w.cfg;
  long expect_rows = cfg.use_subsample ? 4 * g.c : g.c;
  if (chunk.rows() != expect_rows)
    throw ChunkSizeMismatch("expected " + std::to_string(expect_rows) +
                            " frames per chunk, got " + std::to_string(chunk.rows()));
  long o = st.o;

  Mat<S> fresh = cfg.use_subsample
                     ? subsample_step(w.sub, st.sub, chunk)
                     : detail::front_offline(chunk, w);
  Mat<S> window = st.front_tail;
  window.append_rows(fresh);  // encoder frames for globals [o, o + r + c)
  st.front_tail = window.slice_rows(g.c, g.r + g.c);

  long width = 0;
  Mat<S> x = window;
  for (auto idx = static_cast<std::size_t>(0); idx < w.blocks.size(); ++idx)
    x = detail::block_step(x, st.layers[idx], o, g, real_end,
                           w.blocks[idx], cfg, idx == 0 ? &width : nullptr);
  Mat<S> logits = detail::ctc_head(x, w);

  StepLogits<S> out;
  out.final_logits = logits.slice_rows(0, g.c);
  out.prov_logits = logits.slice_rows(g.c, g.r + g.c);
  out.window_width = width;
  st.o += g.c;
  st.step += 1;
  return out;
}

// --- CTC ---------------------------------------------------------------------------

// Greedy decode: per-frame argmax, collapse adjacent repeats, drop blanks.
inline std::vector<int> ctc_collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int prev = 0;
  for (int id : path) {
    if (id != 0 && id != prev) out.push_back(id);
    prev = id;
  }
  return out;
}

template <class S>
inline std::vector<int> ctc_argmax_path(const Mat<S>& logits) {
  std::vector<int> path;
  for (long i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (long v = 1; v < logits.cols(); ++v)
      if (logits(i, v) > logits(i, best)) best = static_cast<int>(v);
    path.push_back(best);
  }
  return path;
}

template <class S>
inline std::vector<int> ctc_greedy(const Mat<S>& logits) {
  return ctc_collapse(ctc_argmax_path(logits));
}

// Streaming decoder state: tokens emitted so far plus the trailing argmax id,
// so per-chunk decodes compose to exactly the full-sequence greedy decode.
struct IncrementalCtc {
  int prev = 0;

  std::vector<int> feed_path(const std::vector<int>& path) {
    std::vector<int> out;
    for (int id : path) {
      if (id != 0 && id != prev) out.push_back(id);
      prev = id;
    }
    return out;
  }
};

}  // namespace tsca
