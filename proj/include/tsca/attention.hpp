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

#include <cmath>
#include <string>
#include <vector>

#include "tsca/errors.hpp"
#include "tsca/mask.hpp"
#include "tsca/mat.hpp"
#include "tsca/rng.hpp"

namespace tsca {

// Fixed sinusoidal encoding of a signed relative distance. Rows are
// parameter-free and depend only on (dist, d), so any two evaluations agree
// bit-for-bit; the learnable projection lives in W_R.
template <class S>
inline void sinusoid_row(long dist, long d, S* out) {
  for (long i = 0; i < d; ++i) {
    double exponent = static_cast<double>(i - (i % 2)) / static_cast<double>(d);
    double angle = static_cast<double>(dist) / std::pow(10000.0, exponent);
    out[i] = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
  }
}

template <class S>
inline Mat<S> sinusoid_rows(long dmin, long dmax, long d) {
  Mat<S> rows(dmax - dmin + 1, d);
  for (long dist = dmin; dist <= dmax; ++dist)
    sinusoid_row(dist, d, rows.row(dist - dmin));
  return rows;
}

// Projections and biases of one relative-position multi-head attention layer.
// [cover_lo, cover_hi] declares which signed distances the encoding table
// serves; evaluations outside it raise DistanceOutOfTable.
template <class S>
struct RelPosParams {
  long d_model = 0;
  long heads = 1;
  Mat<S> w_q, w_k, w_v, w_r, w_o;  // d x d
  std::vector<S> u, v;             // d
  long cover_lo = 0;
  long cover_hi = -1;

  long d_k() const { return d_model / heads; }

  void check_distance(long dist) const {
    if (dist < cover_lo || dist > cover_hi)
      throw DistanceOutOfTable("relative distance " + std::to_string(dist) +
                               " outside table [" + std::to_string(cover_lo) +
                               ", " + std::to_string(cover_hi) + "]");
  }

  // Widening never changes row content, so this is safe whenever the params
  // are not being read concurrently.
  void ensure_coverage(long dmin, long dmax) {
    if (cover_hi < cover_lo) {
      cover_lo = dmin;
      cover_hi = dmax;
      return;
    }
    cover_lo = std::min(cover_lo, dmin);
    cover_hi = std::max(cover_hi, dmax);
  }

  static RelPosParams seeded(long d_model, long heads, long dmin, long dmax,
                             Rng rng) {
    if (heads < 1 || d_model % heads != 0)
      throw InvalidConfig("d_model must be divisible by heads");
    RelPosParams p;
    p.d_model = d_model;
    p.heads = heads;
    p.cover_lo = dmin;
    p.cover_hi = dmax;
    S b = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_model)));
    auto draw = [&](std::uint64_t tag) {
      Rng child = rng.split(tag);
      return Mat<S>::uniform(d_model, d_model, -b, b, child);
    };
    p.w_q = draw(1);
    p.w_k = draw(2);
    p.w_v = draw(3);
    p.w_r = draw(4);
    p.w_o = draw(5);
    Rng cu = rng.split(6), cv = rng.split(7);
    p.u.resize(d_model);
    p.v.resize(d_model);
    for (auto& x : p.u) x = static_cast<S>(cu.next_range(-b, b));
    for (auto& x : p.v) x = static_cast<S>(cv.next_range(-b, b));
    return p;
  }
};

// Per-row Y(i,:) = W * X(i,:).
template <class S>
inline Mat<S> project_rows(const Mat<S>& x, const Mat<S>& w) {
  if (x.cols() != w.cols()) throw ShapeMismatch("project_rows: dim mismatch");
  Mat<S> y(x.rows(), w.rows());
  for (long i = 0; i < x.rows(); ++i) apply_rowvec(w, x.row(i), y.row(i));
  return y;
}

// Projected relative encodings rp(dist) = W_R * R_dist for dist in
// [dmin, dmax]; the range must sit inside the declared coverage.
template <class S>
struct ProjectedRel {
  long dmin = 0;
  Mat<S> rows;

  const S* row_for(long dist) const {
    long row = dist - dmin;
    if (row < 0 || row >= rows.rows())
      throw DistanceOutOfTable("relative distance " + std::to_string(dist) +
                               " outside projected range");
    return rows.row(row);
  }
};

template <class S>
inline ProjectedRel<S> project_rel_range(const RelPosParams<S>& p, long dmin,
                                         long dmax) {
  p.check_distance(dmin);
  p.check_distance(dmax);
  ProjectedRel<S> out;
  out.dmin = dmin;
  out.rows = project_rows(sinusoid_rows<S>(dmin, dmax, p.d_model), p.w_r);
  return out;
}

// Inclusive key interval per query row, in key-array coordinates.
struct KeyRange {
  long lo = 0;
  long hi = -1;
  bool empty() const { return hi < lo; }
};

// --- Spec-level operations ------------------------------------------------------

// Raw scaled-dot scores per head between x rows [q.lo, q.hi] and
// [k.lo, k.hi]. Row distances stand in for global distances, so shifting both
// ranges by the same constant leaves the scores unchanged.
template <class S>
inline std::vector<Mat<S>> rel_scores(const Mat<S>& x, const RelPosParams<S>& p,
                                      KeyRange q, KeyRange k) {
  if (x.cols() != p.d_model) throw ShapeMismatch("rel_scores: feature dim");
  if (q.empty() || k.empty()) throw ShapeMismatch("rel_scores: empty range");
  Mat<S> qp = project_rows(x, p.w_q);
  Mat<S> kp = project_rows(x, p.w_k);
  ProjectedRel<S> rp = project_rel_range(p, q.lo - k.hi, q.hi - k.lo);
  long dk = p.d_k();
  S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));
  std::vector<Mat<S>> e(static_cast<std::size_t>(p.heads),
                        Mat<S>(q.hi - q.lo + 1, k.hi - k.lo + 1));
  for (long h = 0; h < p.heads; ++h) {
    long off = h * dk;
    for (long qi = q.lo; qi <= q.hi; ++qi) {
      const S* qh = qp.row(qi) + off;
      for (long kj = k.lo; kj <= k.hi; ++kj) {
        const S* kh = kp.row(kj) + off;
        const S* rh = rp.row_for(qi - kj) + off;
        S content = dot(qh, kh, dk) + dot(p.u.data() + off, kh, dk);
        S position = dot(qh, rh, dk) + dot(p.v.data() + off, rh, dk);
        e[h](qi - q.lo, kj - k.lo) = (content + position) * scale;
      }
    }
  }
  return e;
}

// Row-stochastic attention weights over allowed keys; disallowed entries are
// exactly zero. Row-max subtraction keeps large logits finite.
template <class S>
inline Mat<S> masked_softmax(const Mat<S>& e, const AttnMask& mask) {
  if (e.rows() != mask.size || e.cols() != mask.size)
    throw ShapeMismatch("masked_softmax: mask size mismatch");
  Mat<S> a(e.rows(), e.cols(), S(0));
  for (long i = 0; i < e.rows(); ++i) {
    S mx = S(0);
    bool any = false;
    for (long j = 0; j < e.cols(); ++j) {
      if (!mask.at(i, j)) continue;
      if (!any || e(i, j) > mx) mx = e(i, j);
      any = true;
    }
    if (!any) throw EmptyRow("query row " + std::to_string(i) + " fully masked");
    S sum = S(0);
    for (long j = 0; j < e.cols(); ++j) {
      if (!mask.at(i, j)) continue;
      S w = std::exp(e(i, j) - mx);
      a(i, j) = w;
      sum += w;
    }
    for (long j = 0; j < e.cols(); ++j)
      if (mask.at(i, j)) a(i, j) /= sum;
  }
  return a;
}

// z_i = sum_j alpha[i][j] * (W_v x_j) per head, heads concatenated, then
// output-projected.
template <class S>
inline Mat<S> attend(const std::vector<Mat<S>>& alpha, const Mat<S>& x,
                     const RelPosParams<S>& p) {
  if (static_cast<long>(alpha.size()) != p.heads)
    throw ShapeMismatch("attend: head count mismatch");
  Mat<S> vp = project_rows(x, p.w_v);
  long dk = p.d_k();
  long tq = alpha[0].rows();
  Mat<S> z(tq, p.d_model, S(0));
  for (long h = 0; h < p.heads; ++h) {
    if (alpha[h].cols() != x.rows()) throw ShapeMismatch("attend: key count");
    long off = h * dk;
    for (long i = 0; i < tq; ++i) {
      S* zi = z.row(i) + off;
      for (long j = 0; j < x.rows(); ++j) {
        S w = alpha[h](i, j);
        if (w == S(0)) continue;
        const S* vh = vp.row(j) + off;
        for (long t = 0; t < dk; ++t) zi[t] += w * vh[t];
      }
    }
  }
  return project_rows(z, p.w_o);
}

// --- Engine core ------------------------------------------------------------------

// Full evaluation from pre-projected tensors. Queries are rows of `qp`; keys
// and values are rows of `kp` / `vp`; `q_global0` / `k_global0` anchor the
// relative distances. `win[i]` bounds the allowed key rows for query i.
// Keys are visited in ascending row order, so a streaming window evaluation
// and an offline evaluation over the same allowed set sum identically.
template <class S>
inline Mat<S> mha_from_projected(const Mat<S>& qp, const Mat<S>& kp,
                                 const Mat<S>& vp, long q_global0, long k_global0,
                                 const std::vector<KeyRange>& win,
                                 const ProjectedRel<S>& rp,
                                 const RelPosParams<S>& p) {
  long dk = p.d_k();
  S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));
  Mat<S> z(qp.rows(), p.d_model, S(0));
  std::vector<S> escratch;
  for (long i = 0; i < qp.rows(); ++i) {
    const KeyRange& kr = win[i];
    if (kr.empty())
      throw EmptyRow("query " + std::to_string(q_global0 + i) + " has no keys");
    long width = kr.hi - kr.lo + 1;
    escratch.resize(static_cast<std::size_t>(width));
    for (long h = 0; h < p.heads; ++h) {
      long off = h * dk;
      const S* qh = qp.row(i) + off;
      S mx = S(0);
      for (long j = 0; j < width; ++j) {
        long kj = kr.lo + j;
        long dist = (q_global0 + i) - (k_global0 + kj);
        const S* kh = kp.row(kj) + off;
        const S* rh = rp.row_for(dist) + off;
        S content = dot(qh, kh, dk) + dot(p.u.data() + off, kh, dk);
        S position = dot(qh, rh, dk) + dot(p.v.data() + off, rh, dk);
        S e = (content + position) * scale;
        escratch[j] = e;
        if (j == 0 || e > mx) mx = e;
      }
      S sum = S(0);
      for (long j = 0; j < width; ++j) {
        escratch[j] = std::exp(escratch[j] - mx);
        sum += escratch[j];
      }
      S* zi = z.row(i) + off;
      for (long j = 0; j < width; ++j) {
        S a = escratch[j] / sum;
        const S* vh = vp.row(kr.lo + j) + off;
        for (long t = 0; t < dk; ++t) zi[t] += a * vh[t];
      }
    }
  }
  return project_rows(z, p.w_o);
}

// One attention evaluation over x with a per-query key interval; distances
// are row distances shifted by `global0`.
template <class S>
inline Mat<S> attention_forward(const Mat<S>& x, const std::vector<KeyRange>& win,
                                const RelPosParams<S>& p, long global0 = 0) {
  if (static_cast<long>(win.size()) != x.rows())
    throw ShapeMismatch("attention_forward: one key range per query row");
  Mat<S> qp = project_rows(x, p.w_q);
  Mat<S> kp = project_rows(x, p.w_k);
  Mat<S> vp = project_rows(x, p.w_v);
  long dmin = 0, dmax = 0;
  for (long i = 0; i < x.rows(); ++i) {
    if (win[static_cast<std::size_t>(i)].empty()) continue;
    dmin = std::min(dmin, i - win[static_cast<std::size_t>(i)].hi);
    dmax = std::max(dmax, i - win[static_cast<std::size_t>(i)].lo);
  }
  ProjectedRel<S> rp = project_rel_range(p, dmin, dmax);
  return mha_from_projected(qp, kp, vp, global0, global0, win, rp, p);
}

// --- Streaming step ----------------------------------------------------------------

// Geometry of one stream: chunk, right context, attention left context.
struct StepGeom {
  long c = 0;
  long r = 0;
  long l_att = 0;

  void validate() const {
    if (c < 1) throw InvalidConfig("chunk size must be >= 1");
    if (r < 0 || r >= c)
      throw InvalidConfig("right context must satisfy 0 <= r < c");
    if (l_att < 0) throw InvalidConfig("l_att must be >= 0");
  }

  long window() const { return l_att + r + c; }
};

template <class S>
struct StepOutput {
  Mat<S> z_final;        // outputs for global frames [o, o+c)
  Mat<S> z_provisional;  // outputs for global frames [o+c, o+c+r)
  long window_width = 0; // key rows involved, cache included
};

// Cached keys/values for global frames [valid_from, next_offset), the raw
// r-frame input tail preceding the next chunk, and the expected next offset.
template <class S>
struct AttnCache {
  Mat<S> k_rows;
  Mat<S> v_rows;
  Mat<S> input_tail;     // r x d, zeros before stream start
  long valid_from = 0;   // global frame of the first cached row
  long next_offset = 0;  // o expected by the next step

  static AttnCache fresh(const StepGeom& g, long d) {
    AttnCache c;
    c.input_tail = Mat<S>(g.r, d, S(0));
    c.valid_from = -g.r;
    c.next_offset = -g.r;
    c.k_rows = Mat<S>(0, d);
    c.v_rows = Mat<S>(0, d);
    return c;
  }

  long rows() const { return k_rows.rows(); }
};

// One TSCA inference step on raw layer input: concatenate the cached r-frame
// tail with the incoming chunk, attend over cached history plus the window
// (padding keys masked), split outputs into the revised+shifted part and the
// in-context-future part, then roll the cache forward by c. K/V freeze only
// up to the last final frame; the in-context-future rows are recomputed from
// revised inputs next step.
template <class S>
inline StepOutput<S> tsca_step(const Mat<S>& chunk, AttnCache<S>& cache, long o,
                               const StepGeom& g, const RelPosParams<S>& p,
                               long real_end = -1) {
  g.validate();
  if (chunk.rows() != g.c)
    throw ChunkSizeMismatch("expected exactly " + std::to_string(g.c) + " frames");
  if (chunk.cols() != p.d_model) throw ShapeMismatch("tsca_step: feature dim");
  if (o < -g.r) throw InvalidOffset("offset below -r");
  if (o != cache.next_offset)
    throw CacheDesync("cache expects offset " + std::to_string(cache.next_offset) +
                      ", got " + std::to_string(o));

  Mat<S> window_in = cache.input_tail;
  window_in.append_rows(chunk);  // globals [o, o + r + c)

  Mat<S> qp = project_rows(window_in, p.w_q);
  Mat<S> kp_win = project_rows(window_in, p.w_k);
  Mat<S> vp_win = project_rows(window_in, p.w_v);

  Mat<S> kp = cache.k_rows;
  kp.append_rows(kp_win);
  Mat<S> vp = cache.v_rows;
  vp.append_rows(vp_win);

  long n_cache = cache.rows();
  long k_global0 = o - n_cache;  // key rows are contiguous globals
  long n_keys = kp.rows();
  long first_real = std::max(0L, -k_global0);
  long last_real = n_keys - 1;
  if (real_end >= 0) last_real = std::min(last_real, real_end - 1 - k_global0);
  if (first_real > last_real) throw EmptyRow("step window holds no real keys");

  std::vector<KeyRange> win(static_cast<std::size_t>(g.r + g.c),
                            KeyRange{first_real, last_real});
  long dmin = o - (k_global0 + last_real);
  long dmax = (o + g.r + g.c - 1) - (k_global0 + first_real);
  ProjectedRel<S> rp = project_rel_range(p, dmin, dmax);
  Mat<S> z = mha_from_projected(qp, kp, vp, o, k_global0, win, rp, p);

  StepOutput<S> out;
  out.z_final = z.slice_rows(0, g.c);
  out.z_provisional = z.slice_rows(g.c, g.r + g.c);
  out.window_width = n_keys;

  long next_o = o + g.c;
  long keep_from = std::max(0L, next_o - g.l_att);
  cache.k_rows = kp.slice_rows(keep_from - k_global0, next_o - k_global0);
  cache.v_rows = vp.slice_rows(keep_from - k_global0, next_o - k_global0);
  cache.valid_from = keep_from;
  cache.input_tail = window_in.slice_rows(g.c, g.r + g.c);
  cache.next_offset = next_o;
  return out;
}

// --- Analytic gradients --------------------------------------------------------------

template <class S>
struct AttnGrads {
  Mat<S> w_q, w_k, w_v, w_r, w_o;
  std::vector<S> u, v;
  Mat<S> x;
};

// Gradients of loss L = sum(G .* attention_forward(x)) with respect to every
// parameter group and the input. Mirrors the forward pass; masked keys never
// enter any sum, so they receive exactly zero gradient through alpha.
template <class S>
inline AttnGrads<S> attention_backward(const Mat<S>& x,
                                       const std::vector<KeyRange>& win,
                                       const RelPosParams<S>& p,
                                       const Mat<S>& g_out, long global0 = 0) {
  long d = p.d_model;
  long dk = p.d_k();
  long t = x.rows();
  S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

  Mat<S> qp = project_rows(x, p.w_q);
  Mat<S> kp = project_rows(x, p.w_k);
  Mat<S> vp = project_rows(x, p.w_v);
  long dmin = 0, dmax = 0;
  for (long i = 0; i < t; ++i) {
    if (win[static_cast<std::size_t>(i)].empty()) continue;
    dmin = std::min(dmin, i - win[static_cast<std::size_t>(i)].hi);
    dmax = std::max(dmax, i - win[static_cast<std::size_t>(i)].lo);
  }
  ProjectedRel<S> rp = project_rel_range(p, dmin, dmax);
  long n_dist = rp.rows.rows();

  // Forward again, keeping alpha and the pre-projection z.
  std::vector<Mat<S>> alpha(static_cast<std::size_t>(p.heads), Mat<S>(t, t, S(0)));
  Mat<S> z(t, d, S(0));
  for (long i = 0; i < t; ++i) {
    const KeyRange& kr = win[static_cast<std::size_t>(i)];
    if (kr.empty()) throw EmptyRow("query has no keys");
    for (long h = 0; h < p.heads; ++h) {
      long off = h * dk;
      const S* qh = qp.row(i) + off;
      S mx = S(0);
      std::vector<S> e(static_cast<std::size_t>(kr.hi - kr.lo + 1));
      for (long j = kr.lo; j <= kr.hi; ++j) {
        const S* kh = kp.row(j) + off;
        const S* rh = rp.row_for(i - j) + off;
        S val = (dot(qh, kh, dk) + dot(p.u.data() + off, kh, dk) +
                 dot(qh, rh, dk) + dot(p.v.data() + off, rh, dk)) * scale;
        e[static_cast<std::size_t>(j - kr.lo)] = val;
        if (j == kr.lo || val > mx) mx = val;
      }
      S sum = S(0);
      for (auto& val : e) {
        val = std::exp(val - mx);
        sum += val;
      }
      for (long j = kr.lo; j <= kr.hi; ++j) {
        S a = e[static_cast<std::size_t>(j - kr.lo)] / sum;
        alpha[static_cast<std::size_t>(h)](i, j) = a;
        const S* vh = vp.row(j) + off;
        S* zi = z.row(i) + off;
        for (long q = 0; q < dk; ++q) zi[q] += a * vh[q];
      }
    }
  }

  AttnGrads<S> gr;
  gr.w_q = Mat<S>(d, d);
  gr.w_k = Mat<S>(d, d);
  gr.w_v = Mat<S>(d, d);
  gr.w_r = Mat<S>(d, d);
  gr.w_o = Mat<S>(d, d);
  gr.u.assign(static_cast<std::size_t>(d), S(0));
  gr.v.assign(static_cast<std::size_t>(d), S(0));
  gr.x = Mat<S>(t, d, S(0));

  // out = z W_o^T  =>  dW_o = g_out^T z, dz = g_out W_o.
  Mat<S> dz(t, d, S(0));
  for (long i = 0; i < t; ++i)
    for (long a = 0; a < d; ++a) {
      S go = g_out(i, a);
      if (go == S(0)) continue;
      for (long b = 0; b < d; ++b) {
        gr.w_o(a, b) += go * z(i, b);
        dz(i, b) += go * p.w_o(a, b);
      }
    }

  Mat<S> dqp(t, d, S(0)), dkp(t, d, S(0)), dvp(t, d, S(0)), drp(n_dist, d, S(0));
  std::vector<S> de(static_cast<std::size_t>(t));
  for (long i = 0; i < t; ++i) {
    const KeyRange& kr = win[static_cast<std::size_t>(i)];
    for (long h = 0; h < p.heads; ++h) {
      long off = h * dk;
      const S* dzi = dz.row(i) + off;
      S s_dot = S(0);
      for (long j = kr.lo; j <= kr.hi; ++j) {
        S da = dot(dzi, vp.row(j) + off, dk);
        de[static_cast<std::size_t>(j)] = da;
        s_dot += alpha[static_cast<std::size_t>(h)](i, j) * da;
      }
      for (long j = kr.lo; j <= kr.hi; ++j) {
        S a = alpha[static_cast<std::size_t>(h)](i, j);
        S dej = a * (de[static_cast<std::size_t>(j)] - s_dot);
        S* dvh = dvp.row(j) + off;
        for (long q = 0; q < dk; ++q) dvh[q] += a * dzi[q];
        if (dej == S(0)) continue;
        long drow = (i - j) - rp.dmin;
        const S* qh = qp.row(i) + off;
        const S* kh = kp.row(j) + off;
        const S* rh = rp.rows.row(drow) + off;
        S* dqh = dqp.row(i) + off;
        S* dkh = dkp.row(j) + off;
        S* drh = drp.row(drow) + off;
        S dejs = dej * scale;
        for (long q = 0; q < dk; ++q) {
          dqh[q] += dejs * (kh[q] + rh[q]);
          dkh[q] += dejs * (qh[q] + p.u[static_cast<std::size_t>(off + q)]);
          drh[q] += dejs * (qh[q] + p.v[static_cast<std::size_t>(off + q)]);
          gr.u[static_cast<std::size_t>(off + q)] += dejs * kh[q];
          gr.v[static_cast<std::size_t>(off + q)] += dejs * rh[q];
        }
      }
    }
  }

  // Projections: P = x W^T  =>  dW = dP^T x, dx += dP W.
  auto backprop_proj = [&](const Mat<S>& dp, const Mat<S>& w, Mat<S>& dw) {
    for (long i = 0; i < t; ++i)
      for (long a = 0; a < d; ++a) {
        S v = dp(i, a);
        if (v == S(0)) continue;
        for (long b = 0; b < d; ++b) {
          dw(a, b) += v * x(i, b);
          gr.x(i, b) += v * w(a, b);
        }
      }
  };
  backprop_proj(dqp, p.w_q, gr.w_q);
  backprop_proj(dkp, p.w_k, gr.w_k);
  backprop_proj(dvp, p.w_v, gr.w_v);
  // rp_dist = W_R R_dist  =>  dW_R = sum_dist drp_dist (x) R_dist.
  Mat<S> rel = sinusoid_rows<S>(rp.dmin, rp.dmin + n_dist - 1, d);
  for (long rr = 0; rr < n_dist; ++rr)
    for (long a = 0; a < d; ++a) {
      S v = drp(rr, a);
      if (v == S(0)) continue;
      for (long b = 0; b < d; ++b) gr.w_r(a, b) += v * rel(rr, b);
    }
  return gr;
}

}  // namespace tsca
