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
#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "tsca/attention.hpp"
#include "tsca/encoder.hpp"
#include "tsca/errors.hpp"
#include "tsca/mask.hpp"
#include "tsca/mat.hpp"
#include "tsca/rng.hpp"
#include "tsca/streaming.hpp"

namespace tsca {

struct EquivalenceReport {
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
  long frames_compared = 0;
  double tolerance = 0.0;
  bool pass = false;

  void write(std::ostream& os) const {
    os << "max_abs_diff=" << max_abs_diff << '\n'
       << "max_rel_diff=" << max_rel_diff << '\n'
       << "frames_compared=" << frames_compared << '\n'
       << "tolerance=" << tolerance << '\n'
       << "pass=" << (pass ? 1 : 0) << '\n';
  }
};

template <class S>
inline EquivalenceReport compare_mats(const Mat<S>& a, const Mat<S>& b,
                                      double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("compare_mats: shape mismatch");
  EquivalenceReport rep;
  rep.tolerance = tol;
  rep.frames_compared = a.rows();
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) {
      double x = static_cast<double>(a(i, j)), y = static_cast<double>(b(i, j));
      double ad = std::fabs(x - y);
      rep.max_abs_diff = std::max(rep.max_abs_diff, ad);
      double denom = std::max(std::fabs(x), std::fabs(y));
      if (denom > 0) rep.max_rel_diff = std::max(rep.max_rel_diff, ad / denom);
    }
  rep.pass = rep.max_abs_diff <= tol;
  return rep;
}

// --- Literal attention reference ---------------------------------------------------

// O(T^2) transcription of the four-term scoring rule, softmax and weighted
// sum, evaluated pair by pair with local temporaries. Deliberately shares no
// routine with the attention module beyond scalar arithmetic: projections are
// re-derived per pair, the encoding rows are recomputed inline, and the
// softmax normalizes without the max-subtraction arrangement.
template <class S>
inline Mat<S> direct_attention(const Mat<S>& x, const AttnMask& mask,
                               const RelPosParams<S>& p) {
  long t = x.rows();
  long d = p.d_model;
  long heads = p.heads;
  long dk = d / heads;
  if (mask.size != t) throw ShapeMismatch("direct_attention: mask size");
  double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  auto matvec = [&](const Mat<S>& w, long row_of_x, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(d), 0.0);
    for (long a = 0; a < d; ++a) {
      double acc = 0.0;
      for (long b = 0; b < d; ++b)
        acc += static_cast<double>(w(a, b)) * static_cast<double>(x(row_of_x, b));
      out[static_cast<std::size_t>(a)] = acc;
    }
  };
  auto encoding = [&](long dist, std::vector<double>& out) {
    p.check_distance(dist);
    out.assign(static_cast<std::size_t>(d), 0.0);
    for (long i = 0; i < d; ++i) {
      double expo = static_cast<double>(i - (i % 2)) / static_cast<double>(d);
      double ang = static_cast<double>(dist) / std::pow(10000.0, expo);
      out[static_cast<std::size_t>(i)] = (i % 2 == 0) ? std::sin(ang) : std::cos(ang);
    }
  };

  Mat<S> z(t, d, S(0));
  std::vector<double> q, k, rel, rproj(static_cast<std::size_t>(d));
  for (long i = 0; i < t; ++i) {
    matvec(p.w_q, i, q);
    for (long h = 0; h < heads; ++h) {
      long off = h * dk;
      // scores for every allowed key
      std::vector<double> weights(static_cast<std::size_t>(t), 0.0);
      double total = 0.0;
      bool any = false;
      for (long j = 0; j < t; ++j) {
        if (!mask.at(i, j)) continue;
        any = true;
        matvec(p.w_k, j, k);
        encoding(i - j, rel);
        for (long a = 0; a < d; ++a) {
          double acc = 0.0;
          for (long b = 0; b < d; ++b)
            acc += static_cast<double>(p.w_r(a, b)) * rel[static_cast<std::size_t>(b)];
          rproj[static_cast<std::size_t>(a)] = acc;
        }
        double e = 0.0;
        for (long a = off; a < off + dk; ++a) {
          e += q[static_cast<std::size_t>(a)] * k[static_cast<std::size_t>(a)];
          e += q[static_cast<std::size_t>(a)] * rproj[static_cast<std::size_t>(a)];
          e += static_cast<double>(p.u[static_cast<std::size_t>(a)]) *
               k[static_cast<std::size_t>(a)];
          e += static_cast<double>(p.v[static_cast<std::size_t>(a)]) *
               rproj[static_cast<std::size_t>(a)];
        }
        weights[static_cast<std::size_t>(j)] = std::exp(e * scale);
        total += weights[static_cast<std::size_t>(j)];
      }
      if (!any) throw EmptyRow("direct_attention: fully masked row");
      std::vector<double> zh(static_cast<std::size_t>(dk), 0.0);
      for (long j = 0; j < t; ++j) {
        double w = weights[static_cast<std::size_t>(j)];
        if (w == 0.0) continue;
        matvec(p.w_v, j, k);
        for (long a = 0; a < dk; ++a)
          zh[static_cast<std::size_t>(a)] += (w / total) * k[static_cast<std::size_t>(off + a)];
      }
      for (long a = 0; a < dk; ++a) z(i, off + a) = static_cast<S>(zh[static_cast<std::size_t>(a)]);
    }
  }
  // output projection, row by row
  Mat<S> out(t, d, S(0));
  for (long i = 0; i < t; ++i)
    for (long a = 0; a < d; ++a) {
      double acc = 0.0;
      for (long b = 0; b < d; ++b)
        acc += static_cast<double>(p.w_o(a, b)) * static_cast<double>(z(i, b));
      out(i, a) = static_cast<S>(acc);
    }
  return out;
}

// --- Streaming vs offline ------------------------------------------------------------

inline FrameWindows windows_from_realized(const std::vector<FrameWindow>& realized,
                                          long r_min) {
  FrameWindows w;
  for (std::size_t g = 0; g < realized.size(); ++g) {
    w.attn.push_back(KeyRange{realized[g].lo, realized[g].hi});
    w.conv_hi.push_back(std::min(static_cast<long>(g) + r_min, realized[g].hi));
  }
  return w;
}

// Rebuilds the realized-window layout, runs the offline forward over the full
// feature sequence and compares it to the concatenated streaming finals.
template <class S>
inline EquivalenceReport offline_equivalence(
    const std::vector<FrameWindow>& realized, const Mat<S>& feats,
    const EncoderWeights<S>& w, long r, const Mat<S>& streaming_finals,
    double tol) {
  FrameWindows layout = windows_from_realized(realized, conv_rmin(w.cfg.kernel_size, r));
  Mat<S> offline = forward_offline(feats, layout, w);
  return compare_mats(offline, streaming_finals, tol);
}

// --- Finite-difference gradient check ----------------------------------------------------

struct GradReport {
  std::string name;
  double rel_err = 0.0;
  bool pass = false;
};

namespace detail {

template <class S>
inline double attn_loss(const Mat<S>& x, const std::vector<KeyRange>& win,
                        const RelPosParams<S>& p, const Mat<S>& g) {
  Mat<S> out = attention_forward(x, win, p);
  double loss = 0.0;
  for (long i = 0; i < out.rows(); ++i)
    for (long j = 0; j < out.cols(); ++j)
      loss += static_cast<double>(g(i, j)) * static_cast<double>(out(i, j));
  return loss;
}

inline double tensor_rel_err(const std::vector<double>& a,
                             const std::vector<double>& b) {
  double na = 0.0, nb = 0.0, nd = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    double d = a[i] - b[i];
    nd += d * d;
  }
  double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom == 0.0) return std::sqrt(nd);
  return std::sqrt(nd) / denom;
}

}  // namespace detail

// Central finite differences against the analytic gradients for every
// parameter group of the scoring rule, plus the input. Double precision only.
template <class S>
inline std::vector<GradReport> fd_gradcheck(const Mat<S>& x,
                                            const std::vector<KeyRange>& win,
                                            const RelPosParams<S>& params,
                                            const Mat<S>& g, double fd_step,
                                            double tol) {
  static_assert(sizeof(S) == sizeof(double),
                "finite differences need double precision");
  AttnGrads<S> an = attention_backward(x, win, params, g);
  std::vector<GradReport> reports;

  auto check_mat = [&](const std::string& name, const Mat<S>& analytic,
                       std::function<Mat<S>&(RelPosParams<S>&)> pick) {
    RelPosParams<S> p = params;
    Mat<S>& slot = pick(p);
    std::vector<double> fd, ana;
    for (long i = 0; i < slot.rows(); ++i)
      for (long j = 0; j < slot.cols(); ++j) {
        S keep = slot(i, j);
        slot(i, j) = keep + static_cast<S>(fd_step);
        double up = detail::attn_loss(x, win, p, g);
        slot(i, j) = keep - static_cast<S>(fd_step);
        double dn = detail::attn_loss(x, win, p, g);
        slot(i, j) = keep;
        fd.push_back((up - dn) / (2.0 * fd_step));
        ana.push_back(static_cast<double>(analytic(i, j)));
      }
    double err = detail::tensor_rel_err(ana, fd);
    reports.push_back(GradReport{name, err, err <= tol});
  };
  auto check_vec = [&](const std::string& name, const std::vector<S>& analytic,
                       std::function<std::vector<S>&(RelPosParams<S>&)> pick) {
    RelPosParams<S> p = params;
    std::vector<S>& slot = pick(p);
    std::vector<double> fd, ana;
    for (std::size_t i = 0; i < slot.size(); ++i) {
      S keep = slot[i];
      slot[i] = keep + static_cast<S>(fd_step);
      double up = detail::attn_loss(x, win, p, g);
      slot[i] = keep - static_cast<S>(fd_step);
      double dn = detail::attn_loss(x, win, p, g);
      slot[i] = keep;
      fd.push_back((up - dn) / (2.0 * fd_step));
      ana.push_back(static_cast<double>(analytic[i]));
    }
    double err = detail::tensor_rel_err(ana, fd);
    reports.push_back(GradReport{name, err, err <= tol});
  };

  check_mat("w_q", an.w_q, [](RelPosParams<S>& p) -> Mat<S>& { return p.w_q; });
  check_mat("w_k", an.w_k, [](RelPosParams<S>& p) -> Mat<S>& { return p.w_k; });
  check_mat("w_v", an.w_v, [](RelPosParams<S>& p) -> Mat<S>& { return p.w_v; });
  check_mat("w_r", an.w_r, [](RelPosParams<S>& p) -> Mat<S>& { return p.w_r; });
  check_vec("u", an.u, [](RelPosParams<S>& p) -> std::vector<S>& { return p.u; });
  check_vec("v", an.v, [](RelPosParams<S>& p) -> std::vector<S>& { return p.v; });

  // input gradient via the same central difference
  {
    Mat<S> xp = x;
    std::vector<double> fd, ana;
    for (long i = 0; i < xp.rows(); ++i)
      for (long j = 0; j < xp.cols(); ++j) {
        S keep = xp(i, j);
        xp(i, j) = keep + static_cast<S>(fd_step);
        double up = detail::attn_loss(xp, win, params, g);
        xp(i, j) = keep - static_cast<S>(fd_step);
        double dn = detail::attn_loss(xp, win, params, g);
        xp(i, j) = keep;
        fd.push_back((up - dn) / (2.0 * fd_step));
        ana.push_back(static_cast<double>(an.x(i, j)));
      }
    double err = detail::tensor_rel_err(ana, fd);
    reports.push_back(GradReport{"x", err, err <= tol});
  }
  return reports;
}

// --- Mask statistics -----------------------------------------------------------------

struct MaskStats {
  long chunks = 0;
  double ext_rate = 0.0;
  std::array<double, 3> consec_rate{};  // m = 1, 2, 3 over disjoint windows
  std::array<long, 3> consec_trials{};
};

// Empirical extension rate and m-consecutive-extension rates, measured on the
// compact layouts a generator produces until at least `min_chunks` chunks
// have been seen. Disjoint windows keep the m-consecutive trials independent
// so binomial bounds apply exactly.
inline MaskStats mask_statistics(const std::function<ChunkLayout()>& generate,
                                 long min_chunks) {
  if (min_chunks < 1000) throw InvalidConfig("need at least 1000 chunks");
  MaskStats st;
  long extended = 0;
  std::array<long, 3> consec_hits{};
  while (st.chunks < min_chunks) {
    ChunkLayout layout = generate();
    const auto& spans = layout.spans;
    st.chunks += static_cast<long>(spans.size());
    for (const auto& s : spans) extended += s.extended ? 1 : 0;
    for (long m = 1; m <= 3; ++m) {
      for (std::size_t i = 0; i + m <= spans.size(); i += static_cast<std::size_t>(m)) {
        bool all = true;
        for (long j = 0; j < m; ++j) all = all && spans[i + static_cast<std::size_t>(j)].extended;
        st.consec_trials[static_cast<std::size_t>(m - 1)] += 1;
        consec_hits[static_cast<std::size_t>(m - 1)] += all ? 1 : 0;
      }
    }
  }
  st.ext_rate = static_cast<double>(extended) / static_cast<double>(st.chunks);
  for (int m = 0; m < 3; ++m)
    st.consec_rate[static_cast<std::size_t>(m)] =
        st.consec_trials[static_cast<std::size_t>(m)]
            ? static_cast<double>(consec_hits[static_cast<std::size_t>(m)]) /
                  static_cast<double>(st.consec_trials[static_cast<std::size_t>(m)])
            : 0.0;
  return st;
}

// --- WER and bootstrap ---------------------------------------------------------------

struct WerCounts {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long ref_len = 0;

  long errors() const { return substitutions + insertions + deletions; }
  double wer() const {
    return ref_len ? static_cast<double>(errors()) / static_cast<double>(ref_len)
                   : 0.0;
  }
};

// Minimal edit distance decomposition via the usual dynamic program; the
// backtrace prefers diagonal moves so ties resolve deterministically.
template <class Tok>
inline WerCounts wer(const std::vector<Tok>& hyp, const std::vector<Tok>& ref) {
  std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<long>> dp(n + 1, std::vector<long>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      long sub = dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      long del = dp[i - 1][j] + 1;  // ref token dropped from hyp
      long ins = dp[i][j - 1] + 1;  // extra hyp token
      dp[i][j] = std::min({sub, del, ins});
    }
  WerCounts c;
  c.ref_len = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dp[i][j] == dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (!(ref[i - 1] == hyp[j - 1])) c.substitutions += 1;
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      c.deletions += 1;
      --i;
    } else {
      c.insertions += 1;
      --j;
    }
  }
  return c;
}

struct UttPair {
  long errors_a = 0;
  long errors_b = 0;
  long ref_words = 0;
};

struct BootstrapResult {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline double percentile(std::vector<double> vals, double q) {
  if (vals.empty()) throw DegenerateInput("empty sample");
  std::sort(vals.begin(), vals.end());
  auto idx = static_cast<std::size_t>(
      std::floor(q * static_cast<double>(vals.size() - 1) + 1e-12));
  return vals[idx];
}

// Percentile-bootstrap confidence interval for the relative WER reduction
// (WER_A - WER_B) / WER_A with pooled error counts. Utterances are resampled
// with replacement B times; the pooled metric is recomputed per resample.
// Resamples whose pooled WER_A is zero carry no defined reduction and are
// redrawn; the draw stream is seeded, so results are reproducible.
inline BootstrapResult bootstrap_ci(const std::vector<UttPair>& utts, long B,
                                    double alpha, std::uint64_t seed) {
  if (B < 1) throw InvalidConfig("B must be >= 1");
  if (alpha <= 0.0 || alpha >= 0.5) throw InvalidConfig("alpha must be in (0, 0.5)");
  if (utts.empty()) throw DegenerateInput("no utterances");
  for (const auto& u : utts)
    if (u.ref_words <= 0) throw DegenerateInput("utterance with no reference words");

  auto pooled_rwerr = [](const std::vector<UttPair>& set, bool* ok) {
    long ea = 0, eb = 0, nw = 0;
    for (const auto& u : set) {
      ea += u.errors_a;
      eb += u.errors_b;
      nw += u.ref_words;
    }
    double wa = static_cast<double>(ea) / static_cast<double>(nw);
    double wb = static_cast<double>(eb) / static_cast<double>(nw);
    if (wa == 0.0) {
      *ok = false;
      return 0.0;
    }
    *ok = true;
    return (wa - wb) / wa;
  };

  bool ok = false;
  double mean = pooled_rwerr(utts, &ok);
  if (!ok) throw DegenerateInput("system A has zero errors on the original set");

  Rng rng(seed);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(B));
  std::vector<UttPair> draw(utts.size());
  while (static_cast<long>(samples.size()) < B) {
    for (auto& slot : draw)
      slot = utts[static_cast<std::size_t>(rng.next_below(utts.size()))];
    bool valid = false;
    double v = pooled_rwerr(draw, &valid);
    if (!valid) continue;  // redraw: reduction undefined at WER_A = 0
    samples.push_back(v);
  }
  BootstrapResult res;
  res.mean = mean;
  res.lo = percentile(samples, alpha);
  res.hi = percentile(samples, 1.0 - alpha);
  return res;
}

}  // namespace tsca
