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
#include <sstream>
#include <string>
#include <vector>

#include "tsca/streaming.hpp"
#include "tsca/oracle.hpp"

using namespace tsca;

namespace {

Mat<double> one_hot_logits(const std::vector<int>& path, long vocab) {
  Mat<double> m(static_cast<long>(path.size()), vocab, 0.0);
  for (std::size_t i = 0; i < path.size(); ++i)
    m(static_cast<long>(i), path[i]) = 1.0;
  return m;
}

// Plays back pre-built per-step logits; geometry-only streaming tests.
struct ScriptedStepper {
  long c = 0, r = 0, dfeat = 1;
  std::vector<StepLogits<double>> script;
  std::size_t at = 0;

  StepLogits<double> step(const Mat<double>&, long) { return script.at(at++); }
  long raw_rows_per_chunk() const { return c; }
  long subframes_for(long rows) const { return rows; }
  long feat_dim() const { return dfeat; }
};

// Seeded random logits; used for the large pipeline-semantics audits.
struct RandomStepper {
  long c = 0, r = 0, vocab = 5;
  Rng rng{0};

  StepLogits<double> step(const Mat<double>&, long) {
    StepLogits<double> sl;
    sl.final_logits = Mat<double>::uniform(c, vocab, -1.0, 1.0, rng);
    sl.prov_logits = Mat<double>::uniform(r, vocab, -1.0, 1.0, rng);
    return sl;
  }
  long raw_rows_per_chunk() const { return c; }
  long subframes_for(long rows) const { return rows; }
  long feat_dim() const { return 1; }
};

template <class Stepper>
struct Counting {
  Stepper inner;
  long calls = 0;
  StepLogits<double> step(const Mat<double>& m, long re) {
    ++calls;
    return inner.step(m, re);
  }
  long raw_rows_per_chunk() const { return inner.raw_rows_per_chunk(); }
  long subframes_for(long rows) const { return inner.subframes_for(rows); }
  long feat_dim() const { return inner.feat_dim(); }
};

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 32;
  cfg.kernel_size = 5;
  cfg.vocab_size = 8;
  cfg.d_feat = 6;
  return cfg;
}

std::string serialize(const std::vector<EmissionEvent>& ev) {
  std::ostringstream os;
  write_event_log(ev, os);
  return os.str();
}

}  // namespace

TEST_CASE("offset starts at -r and increments by c") {
  StepGeom g{10, 6, 8};
  RandomStepper rs{10, 6, 5, Rng(1)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 40.0, &clock);
  std::vector<long> seen;
  Mat<double> chunk(10, 1, 0.0);
  for (int k = 0; k < 4; ++k) {
    seen.push_back(s.offset());
    clock.t = 400.0 * (k + 1);
    s.push_chunk(chunk);
  }
  REQUIRE(seen == std::vector<long>({-6, 4, 14, 24}));
  REQUIRE(s.offset() == 34);
  REQUIRE(s.steps() == 4);
}

TEST_CASE("r = 0 sessions start at zero and emit no provisional events") {
  StepGeom g{5, 0, 4};
  RandomStepper rs{5, 0, 5, Rng(2)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 40.0, &clock);
  REQUIRE(s.offset() == 0);
  Mat<double> chunk(5, 1, 0.0);
  for (int k = 0; k < 3; ++k) {
    auto ev = s.push_chunk(chunk);
    REQUIRE(ev.size() == 1);
    REQUIRE(ev[0].status == EmissionStatus::kFinal);
  }
  auto tail_ev = s.finalize(Mat<double>(0, 1));
  REQUIRE(tail_ev.empty());  // nothing outstanding
  REQUIRE(s.closed());
}

TEST_CASE("display follows the two-stage revision sequence") {
  // Scripted decode: step-1 shows "he"+"lo", step-2 revises to
  // "hello wor"+"ld"; the user never sees the un-previewed intermediate.
  long c = 10, r = 4, vocab = 9;
  std::vector<std::string> table = {"<blank>", "h", "e", "l", "o",
                                    " ",       "w", "r", "d"};
  ScriptedStepper st;
  st.c = c;
  st.r = r;
  // step 1: finals cover globals [-4, 6); rows 0..3 are clipped padding
  st.script.push_back(StepLogits<double>{
      one_hot_logits({0, 0, 0, 0, 1, 1, 0, 2, 2, 0}, vocab),
      one_hot_logits({3, 0, 4, 0}, vocab), 0});
  // step 2: finals cover [6, 16) -> "llo wor"; preview [16, 20) -> "ld"
  st.script.push_back(StepLogits<double>{
      one_hot_logits({3, 0, 3, 4, 0, 5, 6, 4, 7, 0}, vocab),
      one_hot_logits({3, 8, 0, 0}, vocab), 0});
  // closing step: finals [16, 26) clipped to [16, 20) -> "ld" confirmed
  st.script.push_back(StepLogits<double>{
      one_hot_logits({3, 0, 8, 0, 0, 0, 0, 0, 0, 0}, vocab),
      one_hot_logits({0, 0, 0, 0}, vocab), 0});

  StepGeom g{c, r, 6};
  ManualClock clock;
  Session<double, ScriptedStepper> s(st, g, 40.0, &clock);
  Mat<double> chunk(c, 1, 0.0);

  std::vector<std::string> displays;
  s.push_chunk(chunk);
  displays.push_back(s.display_plain(table));
  auto ev2 = s.push_chunk(chunk);
  displays.push_back(s.display_plain(table));
  REQUIRE(ev2[0].status == EmissionStatus::kRevised);  // "lo" became "llo"
  s.finalize(Mat<double>(0, 1));
  displays.push_back(s.display_plain(table));

  REQUIRE(displays == std::vector<std::string>(
                          {"helo", "hello world", "hello world"}));
  for (const auto& d : displays) {
    REQUIRE(d != "he");
    REQUIRE(d != "hello wor");
  }
  REQUIRE(s.display_bracketed(table) == "hello world");
}

TEST_CASE("final ranges tile the stream exactly once") {
  StepGeom g{4, 2, 5};
  RandomStepper rs{4, 2, 6, Rng(3)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 40.0, &clock);
  Mat<double> chunk(4, 1, 0.0);
  for (int k = 0; k < 10; ++k) s.push_chunk(chunk);
  s.finalize(Mat<double>(0, 1));
  long next = 0;
  for (const auto& e : s.events()) {
    if (!e.is_final_kind()) continue;
    REQUIRE(e.begin == next);
    next = e.end;
  }
  REQUIRE(next == 40);
}

TEST_CASE("finalize converts outstanding provisional frames in one extra step") {
  StepGeom g{6, 3, 4};
  Counting<RandomStepper> cs{RandomStepper{6, 3, 5, Rng(4)}, 0};
  ManualClock clock;
  Session<double, Counting<RandomStepper>> s(cs, g, 40.0, &clock);
  Mat<double> chunk(6, 1, 0.0);
  for (int k = 0; k < 5; ++k) s.push_chunk(chunk);
  auto ev = s.finalize(Mat<double>(0, 1));
  REQUIRE(s.stepper().calls == 6);  // five pushes + exactly one closing step
  REQUIRE(ev.size() == 1);
  REQUIRE(ev[0].begin == 27);
  REQUIRE(ev[0].end == 30);
  REQUIRE(ev[0].is_final_kind());
}

TEST_CASE("finalize right after open yields an empty transcript and report") {
  StepGeom g{5, 2, 4};
  RandomStepper rs{5, 2, 5, Rng(5)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 40.0, &clock);
  auto ev = s.finalize(Mat<double>(0, 1));
  REQUIRE(ev.empty());
  REQUIRE(s.committed_tokens().empty());
  auto rep = s.latency_report();
  REQUIRE(rep.steps == 0);
  REQUIRE(rep.upl_per_frame.empty());
  REQUIRE(rep.rtf == 0.0);
  REQUIRE_THROWS_AS(s.push_chunk(Mat<double>(5, 1, 0.0)), SessionClosed);
  REQUIRE_THROWS_AS(s.finalize(Mat<double>(0, 1)), SessionClosed);
}

TEST_CASE("partial tails longer than c - r convert their overhang") {
  StepGeom g{5, 3, 4};
  RandomStepper rs{5, 3, 5, Rng(6)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 40.0, &clock);
  Mat<double> chunk(5, 1, 0.0);
  for (int k = 0; k < 2; ++k) s.push_chunk(chunk);
  // tail of 4 > c - r = 2: the last step finalizes [7, 12) and converts [12, 14)
  auto ev = s.finalize(Mat<double>(4, 1, 0.0));
  REQUIRE(ev.size() == 2);
  REQUIRE(ev[0].begin == 7);
  REQUIRE(ev[0].end == 12);
  REQUIRE(ev[1].begin == 12);
  REQUIRE(ev[1].end == 14);
  REQUIRE_THROWS_AS(s.realized_windows().empty(), SessionOpen);  // closed: fine
}

TEST_CASE("pipeline semantics hold over a thousand random streams") {
  Rng meta(7);
  for (int stream = 0; stream < 1000; ++stream) {
    long c = 2 + static_cast<long>(meta.next_below(7));
    long r = static_cast<long>(meta.next_below(static_cast<std::uint64_t>(c)));
    long pushes = static_cast<long>(meta.next_below(5));
    long tail = static_cast<long>(meta.next_below(static_cast<std::uint64_t>(c + 1)));
    StepGeom g{c, r, 4};
    RandomStepper rs{c, r, 5, Rng(meta.next_u64())};
    ManualClock clock;
    Session<double, RandomStepper> s(rs, g, 10.0, &clock);
    Mat<double> chunk(c, 1, 0.0);
    for (long k = 0; k < pushes; ++k) {
      REQUIRE(s.offset() == -r + k * c);  // offset law at every step
      s.push_chunk(chunk);
    }
    s.finalize(Mat<double>(tail, 1, 0.0));
    long total = pushes * c + tail;

    // coverage, immutability, provisional discipline
    long next = 0;
    const auto& ev = s.events();
    for (std::size_t i = 0; i < ev.size(); ++i) {
      if (ev[i].is_final_kind()) {
        REQUIRE(ev[i].begin == next);
        next = ev[i].end;
      } else {
        REQUIRE(ev[i].end - ev[i].begin <= r);  // revision locality
        // followed next step by a final event covering its range
        bool covered = false;
        for (std::size_t j = i + 1; j < ev.size(); ++j)
          if (ev[j].is_final_kind() && ev[j].step == ev[i].step + 1 &&
              ev[j].begin <= ev[i].begin && ev[j].end >= ev[i].end)
            covered = true;
        REQUIRE(covered);
      }
    }
    REQUIRE(next == total);
    if (total > 0) {
      auto win = s.realized_windows();
      REQUIRE(static_cast<long>(win.size()) == total);
      for (std::size_t i = 1; i < win.size(); ++i) {
        REQUIRE(win[i].lo >= win[i - 1].lo);  // monotone stream order
        REQUIRE(win[i].hi >= win[i - 1].hi);
      }
    }
  }
}

TEST_CASE("realized windows match the chunk layout when r = 0") {
  StepGeom g{5, 0, 7};
  RandomStepper rs{5, 0, 5, Rng(8)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 10.0, &clock);
  Mat<double> chunk(5, 1, 0.0);
  for (int k = 0; k < 4; ++k) s.push_chunk(chunk);
  s.finalize(Mat<double>(0, 1));
  auto win = s.realized_windows();
  for (long f = 0; f < 20; ++f) {
    long start = 5 * (f / 5);
    REQUIRE(win[static_cast<std::size_t>(f)].lo == std::max(0L, start - 7));
    REQUIRE(win[static_cast<std::size_t>(f)].hi == start + 4);
  }
}

TEST_CASE("steady-state realized upper bound is the step offset plus c - 1") {
  // Hand trace over a 3-step stream with c = 4, r = 2: offsets -2, 2, 6,
  // then the closing step at 10.
  StepGeom g{4, 2, 3};
  RandomStepper rs{4, 2, 5, Rng(9)};
  ManualClock clock;
  Session<double, RandomStepper> s(rs, g, 10.0, &clock);
  Mat<double> chunk(4, 1, 0.0);
  for (int k = 0; k < 3; ++k) s.push_chunk(chunk);
  s.finalize(Mat<double>(0, 1));
  auto win = s.realized_windows();
  // frames [0,2) finalized at o=-2 -> hi = 1; [2,6) at o=2 -> hi = 5;
  // [6,10) at o=6 -> hi = 9; [10,12) at the closing o=10 -> hi = 11.
  std::vector<long> expect_hi = {1, 1, 5, 5, 5, 5, 9, 9, 9, 9, 11, 11};
  for (std::size_t f = 0; f < expect_hi.size(); ++f)
    REQUIRE(win[f].hi == expect_hi[f]);
}

TEST_CASE("worst-case perceived latency with instant compute is (c+r) frames") {
  long c = 10, r = 6;
  double fms = 10.0;
  StepGeom g{c, r, 8};
  RandomStepper rs{c, r, 5, Rng(10)};
  ManualClock clock;
  clock.step_compute_ms = 0.0;
  Session<double, RandomStepper> s(rs, g, fms, &clock);
  Mat<double> chunk(c, 1, 0.0);
  for (int k = 0; k < 6; ++k) {
    clock.t = static_cast<double>((k + 1) * c) * fms;  // chunk fully arrived
    s.push_chunk(chunk);
  }
  clock.t = static_cast<double>(6 * c) * fms;
  s.finalize(Mat<double>(0, 1));
  auto rep = s.latency_report();
  REQUIRE(rep.upl_max_ms == Catch::Approx((c + r) * fms));
  REQUIRE(rep.rtf == 0.0);
}

TEST_CASE("fixed compute cost gives the exact rtf ratio") {
  long c = 8, r = 0;
  double fms = 40.0, k_ms = 96.0;
  StepGeom g{c, r, 4};
  RandomStepper rs{c, r, 5, Rng(11)};
  ManualClock clock;
  clock.step_compute_ms = k_ms;
  Session<double, RandomStepper> s(rs, g, fms, &clock);
  Mat<double> chunk(c, 1, 0.0);
  for (int k = 0; k < 5; ++k) {
    clock.t = static_cast<double>((k + 1) * c) * fms;
    s.push_chunk(chunk);
  }
  s.finalize(Mat<double>(0, 1));
  auto rep = s.latency_report();
  REQUIRE(rep.rtf == Catch::Approx(k_ms / (c * fms)));
  REQUIRE(rep.steps == 5);
}

TEST_CASE("same configuration and seed give identical event streams") {
  auto cfg = tiny_config();
  auto w = EncoderWeights<double>::seeded(cfg, 20);
  long c = 5, r = 2, l_att = 6;
  w.ensure_rel_coverage(-(c + r), l_att + r + c);
  StepGeom g{c, r, l_att};
  Mat<double> feats = Mat<double>::uniform(3 * c, cfg.d_feat, -1.0, 1.0,
                                           *std::make_unique<Rng>(21));
  auto run = [&]() {
    ManualClock clock;
    Session<double> s(EncoderStepper<double>(&w, g), g, 40.0, &clock);
    for (long k = 0; k < 3; ++k) {
      clock.t = static_cast<double>((k + 1) * c) * 40.0;
      s.push_chunk(feats.slice_rows(k * c, (k + 1) * c));
    }
    s.finalize(Mat<double>(0, cfg.d_feat));
    return serialize(s.events());
  };
  REQUIRE(run() == run());
}

TEST_CASE("final transcript equals the offline greedy decode") {
  auto cfg = tiny_config();
  auto w = EncoderWeights<double>::seeded(cfg, 22);
  long c = 5, r = 2, l_att = 6;
  w.ensure_rel_coverage(-(c + r), l_att + r + c);
  StepGeom g{c, r, l_att};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng fr(30 + seed);
    long total = 4 * c + 3;
    Mat<double> feats = Mat<double>::uniform(total, cfg.d_feat, -1.0, 1.0, fr);
    ManualClock clock;
    Session<double> s(EncoderStepper<double>(&w, g), g, 40.0, &clock);
    for (long k = 0; k < 4; ++k)
      s.push_chunk(feats.slice_rows(k * c, (k + 1) * c));
    s.finalize(feats.slice_rows(4 * c, total));

    auto rep = offline_equivalence(s.realized_windows(), feats, w, r,
                                   s.final_logits(), 1e-10);
    REQUIRE(rep.pass);
    FrameWindows layout =
        windows_from_realized(s.realized_windows(), conv_rmin(cfg.kernel_size, r));
    Mat<double> offline = forward_offline(feats, layout, w);
    REQUIRE(s.committed_tokens() == ctc_greedy(offline));
  }
}

TEST_CASE("batched sessions are bit-identical to solo runs") {
  auto cfg = tiny_config();
  auto w = EncoderWeights<double>::seeded(cfg, 23);
  long c = 4, r = 2, l_att = 5;
  w.ensure_rel_coverage(-(c + r), l_att + r + c);
  StepGeom g{c, r, l_att};

  const std::size_t n = 8;
  std::vector<std::vector<Mat<double>>> streams(n);
  std::vector<Mat<double>> tails(n, Mat<double>(0, cfg.d_feat));
  for (std::size_t i = 0; i < n; ++i) {
    Rng fr(40 + i);
    long chunks = 2 + static_cast<long>(i % 3);  // unequal stream lengths
    for (long k = 0; k < chunks; ++k)
      streams[i].push_back(Mat<double>::uniform(c, cfg.d_feat, -1.0, 1.0, fr));
  }

  std::vector<std::string> solo_logs;
  for (std::size_t i = 0; i < n; ++i) {
    ManualClock clock;
    Session<double> s(EncoderStepper<double>(&w, g), g, 40.0, &clock);
    for (const auto& chunk : streams[i]) s.push_chunk(chunk);
    s.finalize(tails[i]);
    solo_logs.push_back(serialize(s.events()));
  }

  ManualClock clock;
  std::vector<Session<double>> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    batch.emplace_back(EncoderStepper<double>(&w, g), g, 40.0, &clock);
  std::vector<Session<double>*> ptrs;
  for (auto& s : batch) ptrs.push_back(&s);
  run_batch(ptrs, streams, tails);
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(batch[i].closed());
    REQUIRE(serialize(batch[i].events()) == solo_logs[i]);
  }

  // batch of one degenerates to the solo run
  ManualClock c1;
  std::vector<Session<double>> one;
  one.emplace_back(EncoderStepper<double>(&w, g), g, 40.0, &c1);
  run_batch<double, EncoderStepper<double>>({&one[0]}, {streams[0]}, {tails[0]});
  REQUIRE(serialize(one[0].events()) == solo_logs[0]);
}

TEST_CASE("batch rejects mixed chunk geometry") {
  RandomStepper a{4, 2, 5, Rng(1)}, b{6, 2, 5, Rng(2)};
  ManualClock clock;
  Session<double, RandomStepper> sa(a, StepGeom{4, 2, 5}, 10.0, &clock);
  Session<double, RandomStepper> sb(b, StepGeom{6, 2, 5}, 10.0, &clock);
  std::vector<Session<double, RandomStepper>*> ptrs = {&sa, &sb};
  std::vector<std::vector<Mat<double>>> streams(2);
  std::vector<Mat<double>> tails(2, Mat<double>(0, 1));
  REQUIRE_THROWS_AS(run_batch(ptrs, streams, tails), HeterogeneousConfig);
}

TEST_CASE("event log serialization is tab-separated with token ids") {
  EmissionEvent e;
  e.step = 3;
  e.begin = 10;
  e.end = 14;
  e.status = EmissionStatus::kRevised;
  e.tokens = {5, 2};
  e.wall_ms = 120.5;
  std::ostringstream os;
  write_event_log({e}, os);
  REQUIRE(os.str() == "3\trevised\t10\t14\t120.5\t5 2\n");
}
