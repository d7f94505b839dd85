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

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tsca/encoder.hpp"
#include "tsca/errors.hpp"
#include "tsca/mat.hpp"

namespace tsca {

// --- Time sources -----------------------------------------------------------

// Injected wall clock. `now_ms` stamps chunk arrival; `compute_done` stamps
// emission given the arrival stamp and the measured compute time, which lets
// a simulated clock substitute a scripted compute cost deterministically.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_ms() = 0;
  virtual double compute_done(double arrival_ms, double real_elapsed_ms) = 0;
};

class WallClock final : public Clock {
 public:
  double now_ms() override {
    auto d = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration<double, std::milli>(d).count();
  }
  double compute_done(double arrival_ms, double real_elapsed_ms) override {
    return arrival_ms + real_elapsed_ms;
  }
};

// Driver-controlled clock: `t` is set by the stream driver; each step costs
// exactly `step_compute_ms` regardless of real compute time.
class ManualClock final : public Clock {
 public:
  double t = 0.0;
  double step_compute_ms = 0.0;

  double now_ms() override { return t; }
  double compute_done(double arrival_ms, double) override {
    return arrival_ms + step_compute_ms;
  }
};

// --- Event model -----------------------------------------------------------------

enum class EmissionStatus { kFinal, kProvisional, kRevised };

inline const char* to_string(EmissionStatus s) {
  switch (s) {
    case EmissionStatus::kFinal: return "final";
    case EmissionStatus::kProvisional: return "provisional";
    default: return "revised";
  }
}

// A transcript span. `revised` counts as final: its range is committed.
struct EmissionEvent {
  long step = 0;
  long begin = 0;  // global sub-sampled frame range [begin, end)
  long end = 0;
  EmissionStatus status = EmissionStatus::kFinal;
  std::vector<int> tokens;
  double wall_ms = 0.0;

  bool is_final_kind() const { return status != EmissionStatus::kProvisional; }
};

inline void write_event_log(const std::vector<EmissionEvent>& events,
                            std::ostream& os) {
  for (const auto& e : events) {
    os << e.step << '\t' << to_string(e.status) << '\t' << e.begin << '\t'
       << e.end << '\t' << e.wall_ms << '\t';
    for (std::size_t i = 0; i < e.tokens.size(); ++i) {
      if (i) os.put(' ');
      os << e.tokens[i];
    }
    os.put('\n');
  }
}

// Key range a frame's final output was computed under.
struct FrameWindow {
  long lo = 0;
  long hi = 0;
};

struct LatencyReport {
  std::vector<double> upl_per_frame;
  double upl_mean_ms = 0.0;
  double upl_max_ms = 0.0;
  double rtf = 0.0;
  std::vector<double> per_step_compute_ms;
  long steps = 0;

  void write(std::ostream& os) const {
    os << "upl_mean_ms=" << upl_mean_ms << '\n'
       << "upl_max_ms=" << upl_max_ms << '\n'
       << "rtf=" << rtf << '\n'
       << "steps=" << steps << '\n';
  }
};

// --- Steppers ---------------------------------------------------------------------

// Runs the encoder; owns the per-session state, shares the weights.
template <class S>
class EncoderStepper {
 public:
  EncoderStepper(const EncoderWeights<S>* weights, const StepGeom& g)
      : w_(weights), geom_(g), state_(EncoderState<S>::fresh(*weights, g)) {}

  StepLogits<S> step(const Mat<S>& chunk, long real_end) {
    return forward_step(chunk, state_, *w_, geom_, real_end);
  }

  long raw_rows_per_chunk() const {
    return w_->cfg.use_subsample ? 4 * geom_.c : geom_.c;
  }
  long subframes_for(long raw_rows) const {
    return w_->cfg.use_subsample ? (raw_rows + 3) / 4 : raw_rows;
  }
  long feat_dim() const { return w_->cfg.d_feat; }

  EncoderState<S>& state() { return state_; }

 private:
  const EncoderWeights<S>* w_;
  StepGeom geom_;
  EncoderState<S> state_;
};

// --- Session -----------------------------------------------------------------------

// One streaming decode: offset tracking from -r, per-step final + provisional
// emission, single-revision display semantics, realized-window recording and
// latency accounting. Owned by one logical thread; sessions never share
// mutable state.
template <class S, class Stepper = EncoderStepper<S>>
class Session {
 public:
  Session(Stepper stepper, const StepGeom& g, double frame_ms, Clock* clock)
      : stepper_(std::move(stepper)), geom_(g), frame_ms_(frame_ms), clock_(clock) {
    g.validate();
    if (frame_ms <= 0) throw InvalidConfig("frame_ms must be > 0");
    o_ = -g.r;
  }

  long offset() const { return o_; }
  long steps() const { return step_; }
  bool closed() const { return closed_; }
  const StepGeom& geom() const { return geom_; }
  const std::vector<EmissionEvent>& events() const { return events_; }
  const Mat<S>& final_logits() const { return final_logits_; }
  const std::vector<int>& committed_tokens() const { return committed_; }
  const std::vector<int>& provisional_tokens() const { return provisional_; }

  std::vector<EmissionEvent> push_chunk(const Mat<S>& chunk) {
    if (closed_) throw SessionClosed("push_chunk after finalize");
    if (chunk.rows() != stepper_.raw_rows_per_chunk())
      throw ChunkSizeMismatch("push_chunk expects exactly " +
                              std::to_string(stepper_.raw_rows_per_chunk()) +
                              " frames");
    double entry = clock_->now_ms();
    note_arrivals(step_ * geom_.c, (step_ + 1) * geom_.c, entry);

    auto t0 = std::chrono::steady_clock::now();
    StepLogits<S> sl = stepper_.step(chunk, -1);
    double elapsed = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    double emit = clock_->compute_done(entry, elapsed);
    per_step_compute_.push_back(emit - entry);

    std::vector<EmissionEvent> out = emit_step(sl, emit, -1);
    advance();
    return out;
  }

  // Right-pads the tail (0..c frames) with masked zeros, runs one last step
  // when anything is outstanding, converts remaining provisional frames to
  // final and closes the session.
  std::vector<EmissionEvent> finalize(const Mat<S>& tail) {
    if (closed_) throw SessionClosed("finalize called twice");
    long t_sub = stepper_.subframes_for(tail.rows());
    if (t_sub > geom_.c)
      throw ChunkSizeMismatch("finalize tail longer than one chunk");
    long total = step_ * geom_.c + t_sub;
    std::vector<EmissionEvent> out;
    bool outstanding = geom_.r > 0 && step_ > 0;
    if (t_sub > 0 || outstanding) {
      double entry = clock_->now_ms();
      if (t_sub > 0) note_arrivals(step_ * geom_.c, total, entry);

      Mat<S> padded(stepper_.raw_rows_per_chunk(), tail.empty()
                                                       ? stepper_.feat_dim()
                                                       : tail.cols(),
                    S(0));
      for (long i = 0; i < tail.rows(); ++i)
        for (long f = 0; f < tail.cols(); ++f) padded(i, f) = tail(i, f);

      auto t0 = std::chrono::steady_clock::now();
      StepLogits<S> sl = stepper_.step(padded, total);
      double elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
      double emit = clock_->compute_done(entry, elapsed);
      per_step_compute_.push_back(emit - entry);

      out = emit_step(sl, emit, total);
      // Remaining provisional frames [o+c, total) become final as computed.
      long conv_begin = o_ + geom_.c;
      if (total > conv_begin) {
        EmissionEvent ev;
        ev.step = step_;
        ev.begin = conv_begin;
        ev.end = total;
        ev.status = EmissionStatus::kFinal;
        ev.wall_ms = emit;
        for (long g = conv_begin; g < total; ++g) {
          append_final_row(sl.prov_logits, g - conv_begin);
          record_window(std::max(0L, o_ - geom_.l_att), total - 1);
          int id = argmax_row(sl.prov_logits, g - conv_begin);
          auto toks = inc_.feed_path({id});
          ev.tokens.insert(ev.tokens.end(), toks.begin(), toks.end());
          upl_.push_back(emit - arrival_[static_cast<std::size_t>(g)]);
        }
        committed_.insert(committed_.end(), ev.tokens.begin(), ev.tokens.end());
        events_.push_back(ev);
        out.push_back(ev);
      }
      advance();
    }
    provisional_.clear();
    closed_ = true;
    total_ = total;
    check_coverage();
    return out;
  }

  // Final key windows per frame; only valid on a closed session.
  std::vector<FrameWindow> realized_windows() const {
    if (!closed_) throw SessionOpen("realized_windows on an open session");
    return realized_;
  }

  LatencyReport latency_report() const {
    if (!closed_) throw SessionOpen("latency_report on an open session");
    LatencyReport rep;
    rep.upl_per_frame = upl_;
    rep.per_step_compute_ms = per_step_compute_;
    rep.steps = static_cast<long>(per_step_compute_.size());
    for (double u : upl_) {
      rep.upl_mean_ms += u;
      rep.upl_max_ms = std::max(rep.upl_max_ms, u);
    }
    if (!upl_.empty()) rep.upl_mean_ms /= static_cast<double>(upl_.size());
    double mean_compute = 0.0;
    for (double cpted : per_step_compute_) mean_compute += cpted;
    if (!per_step_compute_.empty())
      mean_compute /= static_cast<double>(per_step_compute_.size());
    rep.rtf = mean_compute / (static_cast<double>(geom_.c) * frame_ms_);
    return rep;
  }

  std::string display_plain(const std::vector<std::string>& table) const {
    return join(committed_, table) + join(provisional_, table);
  }

  std::string display_bracketed(const std::vector<std::string>& table) const {
    std::string s = join(committed_, table);
    if (!provisional_.empty()) s += "[" + join(provisional_, table) + "]";
    return s;
  }

  Stepper& stepper() { return stepper_; }

 private:
  void advance() {
    o_ += geom_.c;
    step_ += 1;
    if (o_ != -geom_.r + step_ * geom_.c)
      throw InternalError("offset law violated");  // unreachable by design
  }

  void note_arrivals(long begin, long end, double entry) {
    // Frame g arrived (end - g) frame periods before the chunk completed.
    if (static_cast<long>(arrival_.size()) < end)
      arrival_.resize(static_cast<std::size_t>(end), 0.0);
    for (long g = begin; g < end; ++g)
      arrival_[static_cast<std::size_t>(g)] =
          entry - static_cast<double>(end - g) * frame_ms_;
  }

  static int argmax_row(const Mat<S>& m, long row) {
    int best = 0;
    for (long v = 1; v < m.cols(); ++v)
      if (m(row, v) > m(row, best)) best = static_cast<int>(v);
    return best;
  }

  void append_final_row(const Mat<S>& m, long row) {
    if (final_logits_.rows() == 0 && final_logits_.cols() == 0)
      final_logits_ = Mat<S>(0, m.cols());
    Mat<S> one(1, m.cols());
    for (long v = 0; v < m.cols(); ++v) one(0, v) = m(row, v);
    final_logits_.append_rows(one);
  }

  void record_window(long lo, long hi) { realized_.push_back(FrameWindow{lo, hi}); }

  // Decode and emit one step's outputs: the final event over [o, o+c) clipped
  // to real frames (revised status when the leading r frames' tokens changed
  // vs the prior provisional event), then the provisional preview.
  std::vector<EmissionEvent> emit_step(const StepLogits<S>& sl, double emit_ms,
                                       long total) {
    std::vector<EmissionEvent> out;
    long o = o_;
    long fin_begin = std::max(0L, o);
    long fin_end = total >= 0 ? std::min(o + geom_.c, total) : o + geom_.c;
    long attn_lo = std::max(0L, o - geom_.l_att);
    long attn_hi = total >= 0 ? std::min(o + geom_.c - 1, total - 1)
                              : o + geom_.c - 1;

    EmissionEvent fin;
    fin.step = step_;
    fin.begin = fin_begin;
    fin.end = fin_end;
    fin.wall_ms = emit_ms;
    std::vector<int> overlap_tokens;
    for (long g = fin_begin; g < fin_end; ++g) {
      append_final_row(sl.final_logits, g - o);
      record_window(attn_lo, attn_hi);
      int id = argmax_row(sl.final_logits, g - o);
      auto toks = inc_.feed_path({id});
      if (g < o + geom_.r)
        overlap_tokens.insert(overlap_tokens.end(), toks.begin(), toks.end());
      fin.tokens.insert(fin.tokens.end(), toks.begin(), toks.end());
      upl_.push_back(emit_ms - arrival_[static_cast<std::size_t>(g)]);
    }
    bool revised = step_ > 0 && geom_.r > 0 && overlap_tokens != provisional_;
    fin.status = revised ? EmissionStatus::kRevised : EmissionStatus::kFinal;
    committed_.insert(committed_.end(), fin.tokens.begin(), fin.tokens.end());
    events_.push_back(fin);
    out.push_back(fin);

    provisional_.clear();
    // No provisional preview on the finalize step: whatever remains past the
    // final region is converted straight to final by the caller.
    if (geom_.r > 0 && total < 0) {
      long prov_end = o + geom_.c + geom_.r;
      EmissionEvent prov;
      prov.step = step_;
      prov.begin = o + geom_.c;
      prov.end = prov_end;
      prov.status = EmissionStatus::kProvisional;
      prov.wall_ms = emit_ms;
      IncrementalCtc preview = inc_;
      for (long g = prov.begin; g < prov.end; ++g) {
        int id = argmax_row(sl.prov_logits, g - prov.begin);
        auto toks = preview.feed_path({id});
        prov.tokens.insert(prov.tokens.end(), toks.begin(), toks.end());
      }
      provisional_ = prov.tokens;
      events_.push_back(prov);
      out.push_back(prov);
    }
    return out;
  }

  void check_coverage() const {
    // Final ranges must tile [0, total) exactly once, in order.
    long next = 0;
    for (const auto& e : events_) {
      if (!e.is_final_kind()) continue;
      if (e.begin != next)
        throw InternalError("final ranges must be contiguous and in order");
      next = e.end;
    }
    if (next != total_) throw InternalError("final ranges must cover the stream");
  }

  static std::string join(const std::vector<int>& ids,
                          const std::vector<std::string>& table) {
    std::string s;
    for (int id : ids)
      s += (id >= 0 && id < static_cast<int>(table.size())) ? table[id]
                                                            : ("<" + std::to_string(id) + ">");
    return s;
  }

  Stepper stepper_;
  StepGeom geom_;
  double frame_ms_;
  Clock* clock_;
  long o_ = 0;
  long step_ = 0;
  long total_ = 0;
  bool closed_ = false;
  IncrementalCtc inc_;
  std::vector<int> committed_;
  std::vector<int> provisional_;  // tokens of the last provisional event
  std::vector<EmissionEvent> events_;
  Mat<S> final_logits_;
  std::vector<FrameWindow> realized_;
  std::vector<double> arrival_;
  std::vector<double> upl_;
  std::vector<double> per_step_compute_;
};

// --- Batch driver ----------------------------------------------------------------

// Lockstep driver over independent sessions. Sessions must share (c, r) so
// the step windows have uniform size; apart from immutable weights they share
// nothing, so batched outputs match solo runs bit for bit.
template <class S, class Stepper>
inline void run_batch(std::vector<Session<S, Stepper>*> sessions,
                      const std::vector<std::vector<Mat<S>>>& chunk_streams,
                      const std::vector<Mat<S>>& tails) {
  if (sessions.size() != chunk_streams.size() || sessions.size() != tails.size())
    throw ShapeMismatch("run_batch: one stream and tail per session");
  for (std::size_t i = 1; i < sessions.size(); ++i) {
    if (sessions[i]->geom().c != sessions[0]->geom().c ||
        sessions[i]->geom().r != sessions[0]->geom().r)
      throw HeterogeneousConfig("batch sessions must share (c, r)");
  }
  std::size_t max_len = 0;
  for (const auto& s : chunk_streams) max_len = std::max(max_len, s.size());
  for (std::size_t k = 0; k < max_len; ++k) {
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      if (k < chunk_streams[i].size()) {
        sessions[i]->push_chunk(chunk_streams[i][k]);
      } else if (!sessions[i]->closed()) {
        sessions[i]->finalize(tails[i]);  // shorter stream ends early
      }
    }
  }
  for (std::size_t i = 0; i < sessions.size(); ++i)
    if (!sessions[i]->closed()) sessions[i]->finalize(tails[i]);
}

}  // namespace tsca
