/*
 * Copyright 2026 The llpbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "llpbench/table.hpp"

namespace llpbench {

// Sparse vector with entries sorted by index.
struct SparseVec {
  std::vector<std::int32_t> idx;
  std::vector<double> val;
  std::int32_t dim = 0;

  double sq_norm() const {
    double s = 0.0;
    for (double v : val) s += v * v;
    return s;
  }
};

inline double dot(const SparseVec& a, const SparseVec& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.idx.size() && j < b.idx.size()) {
    if (a.idx[i] < b.idx[j]) {
      ++i;
    } else if (a.idx[i] > b.idx[j]) {
      ++j;
    } else {
      s += a.val[i] * b.val[j];
      ++i;
      ++j;
    }
  }
  return s;
}

inline double sq_dist(const SparseVec& a, const SparseVec& b) {
  return a.sq_norm() + b.sq_norm() - 2.0 * dot(a, b);
}

// The geometry used by the separation metrics. Multihot mode concatenates a
// one-hot block per categorical column with the numerical columns min-max
// scaled to [0,1] (the integer codes carry no ordinal meaning). RawNumeric
// exposes the numerical columns as-is.
class FeatureSpace {
 public:
  enum class Kind { Multihot, RawNumeric };

  static FeatureSpace multihot(const InstanceTable& t) {
    FeatureSpace fs(t, Kind::Multihot);
    fs.offsets_.resize(static_cast<std::size_t>(t.n_cat) + 1, 0);
    for (int c = 0; c < t.n_cat; ++c) {
      fs.offsets_[static_cast<std::size_t>(c) + 1] =
          fs.offsets_[static_cast<std::size_t>(c)] + t.vocab_sizes[static_cast<std::size_t>(c)];
    }
    fs.dim_ = fs.offsets_.back() + t.n_num;
    fs.num_min_.assign(static_cast<std::size_t>(t.n_num), 0.0);
    fs.num_scale_.assign(static_cast<std::size_t>(t.n_num), 0.0);
    for (int c = 0; c < t.n_num; ++c) {
      double mn = std::numeric_limits<double>::infinity();
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t r = 0; r < t.m; ++r) {
        mn = std::min(mn, t.num_at(r, c));
        mx = std::max(mx, t.num_at(r, c));
      }
      fs.num_min_[static_cast<std::size_t>(c)] = mn;
      fs.num_scale_[static_cast<std::size_t>(c)] = mx > mn ? 1.0 / (mx - mn) : 0.0;
    }
    return fs;
  }

  static FeatureSpace raw_numeric(const InstanceTable& t) {
    FeatureSpace fs(t, Kind::RawNumeric);
    fs.dim_ = t.n_num;
    return fs;
  }

  Kind kind() const { return kind_; }
  std::int32_t dim() const { return dim_; }
  std::string kind_name() const { return kind_ == Kind::Multihot ? "multihot" : "raw_numeric"; }

  SparseVec vec(std::int64_t row) const {
    SparseVec v;
    v.dim = dim_;
    if (kind_ == Kind::Multihot) {
      v.idx.reserve(static_cast<std::size_t>(table_->n_cat + table_->n_num));
      v.val.reserve(static_cast<std::size_t>(table_->n_cat + table_->n_num));
      for (int c = 0; c < table_->n_cat; ++c) {
        v.idx.push_back(offsets_[static_cast<std::size_t>(c)] + table_->cat_at(row, c));
        v.val.push_back(1.0);
      }
      for (int c = 0; c < table_->n_num; ++c) {
        const double x = (table_->num_at(row, c) - num_min_[static_cast<std::size_t>(c)]) *
                         num_scale_[static_cast<std::size_t>(c)];
        if (x != 0.0) {
          v.idx.push_back(offsets_.back() + c);
          v.val.push_back(x);
        }
      }
    } else {
      for (int c = 0; c < table_->n_num; ++c) {
        const double x = table_->num_at(row, c);
        if (x != 0.0) {
          v.idx.push_back(c);
          v.val.push_back(x);
        }
      }
    }
    return v;
  }

  std::vector<SparseVec> all_vecs() const {
    std::vector<SparseVec> vs;
    vs.reserve(static_cast<std::size_t>(table_->m));
    for (std::int64_t r = 0; r < table_->m; ++r) vs.push_back(vec(r));
    return vs;
  }

 private:
  FeatureSpace(const InstanceTable& t, Kind kind) : table_(&t), kind_(kind) {}

  const InstanceTable* table_;
  Kind kind_;
  std::int32_t dim_ = 0;
  std::vector<std::int32_t> offsets_;
  std::vector<double> num_min_;
  std::vector<double> num_scale_;
};

}  // namespace llpbench
