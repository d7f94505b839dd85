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

#include <cstddef>
#include <vector>

#include "tsca/errors.hpp"
#include "tsca/rng.hpp"

namespace tsca {

// Small dense row-major matrix. All engine math runs on explicit loops over
// this type so that summation order is fixed; streaming-vs-offline checks
// rely on both paths visiting keys in the same order.
template <class S>
class Mat {
 public:
  Mat() = default;
  Mat(long rows, long cols, S fill = S(0))
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {}

  long rows() const { return rows_; }
  long cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  S& operator()(long r, long c) { return data_[static_cast<std::size_t>(r * cols_ + c)]; }
  const S& operator()(long r, long c) const {
    return data_[static_cast<std::size_t>(r * cols_ + c)];
  }

  S* row(long r) { return data_.data() + r * cols_; }
  const S* row(long r) const { return data_.data() + r * cols_; }

  std::vector<S>& data() { return data_; }
  const std::vector<S>& data() const { return data_; }

  bool operator==(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  // Rows [begin, end) as a copy.
  Mat slice_rows(long begin, long end) const {
    Mat out(end - begin, cols_);
    for (long r = begin; r < end; ++r)
      for (long c = 0; c < cols_; ++c) out(r - begin, c) = (*this)(r, c);
    return out;
  }

  void append_rows(const Mat& other) {
    if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
    if (other.cols_ != cols_) throw ShapeMismatch("append_rows: column mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
  }

  static Mat uniform(long rows, long cols, S lo, S hi, Rng& rng) {
    Mat out(rows, cols);
    for (auto& v : out.data_) v = static_cast<S>(rng.next_range(lo, hi));
    return out;
  }

 private:
  long rows_ = 0;
  long cols_ = 0;
  std::vector<S> data_;
};

// y = M x for a row-major matrix applied to a row vector: y_a = sum_b W(a,b) x_b.
// Used for per-frame projections; kept free so call sites read like math.
template <class S>
inline void apply_rowvec(const Mat<S>& w, const S* x, S* y) {
  for (long a = 0; a < w.rows(); ++a) {
    S acc = S(0);
    for (long b = 0; b < w.cols(); ++b) acc += w(a, b) * x[b];
    y[a] = acc;
  }
}

template <class S>
inline S dot(const S* a, const S* b, long n) {
  S acc = S(0);
  for (long i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace tsca
