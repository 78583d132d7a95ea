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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "llpbench/bagging.hpp"
#include "llpbench/common.hpp"
#include "llpbench/model.hpp"
#include "llpbench/table.hpp"

namespace llpbench::test {

inline std::filesystem::path tmp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("llpbench_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_tmp(const std::filesystem::path& dir, const std::string& name,
                                       const std::string& content) {
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

inline InstanceTable make_table(const std::vector<std::int32_t>& vocab_sizes,
                                const std::vector<std::vector<std::int32_t>>& cat_rows,
                                const std::vector<double>& labels,
                                const std::vector<std::vector<double>>& num_rows = {},
                                Mode mode = Mode::Ctr) {
  InstanceTable t;
  t.mode = mode;
  t.m = static_cast<std::int64_t>(labels.size());
  t.n_cat = static_cast<int>(vocab_sizes.size());
  t.n_num = num_rows.empty() ? 0 : static_cast<int>(num_rows[0].size());
  t.vocab_sizes = vocab_sizes;
  for (int c = 0; c < t.n_cat; ++c) t.cat_names.push_back("C" + std::to_string(c + 1));
  for (int c = 0; c < t.n_num; ++c) t.num_names.push_back("N" + std::to_string(c + 1));
  t.label_name = "label";
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (int c = 0; c < t.n_cat; ++c) t.cat.push_back(cat_rows[r][static_cast<std::size_t>(c)]);
    for (int c = 0; c < t.n_num; ++c) t.num.push_back(num_rows[r][static_cast<std::size_t>(c)]);
    t.labels.push_back(labels[r]);
  }
  return t;
}

// Random binary-label table for property tests.
inline InstanceTable random_table(Rng& rng, std::int64_t m, int n_cat, std::int32_t vocab,
                                  int n_num = 0) {
  std::vector<std::vector<std::int32_t>> cat_rows;
  std::vector<std::vector<double>> num_rows;
  std::vector<double> labels;
  for (std::int64_t r = 0; r < m; ++r) {
    std::vector<std::int32_t> row;
    for (int c = 0; c < n_cat; ++c) row.push_back(static_cast<std::int32_t>(rng.below(vocab)));
    cat_rows.push_back(std::move(row));
    if (n_num > 0) {
      std::vector<double> nrow;
      for (int c = 0; c < n_num; ++c) nrow.push_back(rng.uniform());
      num_rows.push_back(std::move(nrow));
    }
    labels.push_back(rng.below(2) == 0 ? 0.0 : 1.0);
  }
  return make_table(std::vector<std::int32_t>(static_cast<std::size_t>(n_cat), vocab), cat_rows,
                    labels, num_rows);
}

// A random partition of the table into 2..max_bags non-empty bags.
inline BagCollection random_partition(Rng& rng, const InstanceTable& t, int max_bags) {
  const int n_bags = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_bags - 1)));
  std::vector<std::vector<std::int64_t>> members(static_cast<std::size_t>(n_bags));
  for (std::int64_t i = 0; i < t.m; ++i) {
    members[rng.below(static_cast<std::uint64_t>(n_bags))].push_back(i);
  }
  BagCollection coll;
  coll.table_m = t.m;
  coll.table_fingerprint = table_fingerprint(t);
  for (auto& ms : members) {
    if (ms.empty()) continue;
    Bag b;
    b.members = std::move(ms);
    b.label_sum = recompute_label_sum(b, t);
    coll.bags.push_back(std::move(b));
  }
  if (coll.bags.size() < 2) {  // retry until at least two non-empty bags
    return random_partition(rng, t, max_bags);
  }
  return coll;
}

// Planted logistic generator: categorical-only table whose label follows a
// Bernoulli with logit = sum of per-feature code weights + intercept.
inline InstanceTable planted_logistic(std::uint64_t seed, std::int64_t m, int n_cat,
                                      std::int32_t vocab, double theta_sd = 2.0,
                                      double intercept = -0.3) {
  Rng rng(seed);
  std::vector<std::vector<double>> theta(static_cast<std::size_t>(n_cat));
  for (auto& col : theta) {
    for (std::int32_t v = 0; v < vocab; ++v) col.push_back(theta_sd * rng.normal());
  }
  InstanceTable t;
  t.mode = Mode::Ctr;
  t.m = m;
  t.n_cat = n_cat;
  t.n_num = 0;
  t.vocab_sizes.assign(static_cast<std::size_t>(n_cat), vocab);
  for (int c = 0; c < n_cat; ++c) t.cat_names.push_back("C" + std::to_string(c + 1));
  t.label_name = "label";
  for (std::int64_t r = 0; r < m; ++r) {
    double logit = intercept;
    for (int c = 0; c < n_cat; ++c) {
      const std::int32_t code = static_cast<std::int32_t>(rng.below(vocab));
      t.cat.push_back(code);
      logit += theta[static_cast<std::size_t>(c)][static_cast<std::size_t>(code)];
    }
    t.labels.push_back(rng.uniform() < sigmoid(logit) ? 1.0 : 0.0);
  }
  return t;
}

// Central finite difference of a scalar function of the flat parameter
// vector, the oracle for every gradient check (h = 1e-5, f64).
// Gradient-check fixtures draw every coordinate (biases included) from a
// continuous distribution; init_params' exact-zero biases can park a relu
// pre-activation exactly on the kink, where the subgradient convention and a
// straddling central difference legitimately disagree.
template <typename F>
double fd_partial(F&& loss_of_params, std::vector<double>& theta, std::size_t i,
                  double h = 1e-5) {
  const double orig = theta[i];
  theta[i] = orig + h;
  const double up = loss_of_params();
  theta[i] = orig - h;
  const double dn = loss_of_params();
  theta[i] = orig;
  return (up - dn) / (2.0 * h);
}

// Relative agreement within 1e-4, with an absolute floor for near-zero pairs
// where the quotient is dominated by finite-difference roundoff.
inline bool grad_close(double analytic, double fd, double rel_tol = 1e-4,
                       double abs_floor = 1e-8) {
  const double scale = std::max(std::abs(analytic), std::abs(fd));
  return std::abs(analytic - fd) <= rel_tol * scale + abs_floor;
}

inline ModelParams random_params(Rng& rng, ModelShape shape, double scale = 0.5) {
  ModelParams p;
  p.shape = shape;
  p.theta.resize(shape.param_count());
  for (auto& v : p.theta) v = scale * (2.0 * rng.uniform() - 1.0);
  return p;
}

}  // namespace llpbench::test
