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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "llpbench/bagging.hpp"
#include "llpbench/common.hpp"
#include "llpbench/feature_space.hpp"

namespace llpbench {

// A minibatch of bags: flattened member inputs plus per-bag offsets and label
// sums. Predictions are supplied aligned to the flattened order.
struct BagBatch {
  std::vector<const SparseVec*> inputs;
  std::vector<std::int64_t> instance_ids;
  std::vector<std::int32_t> offsets;  // num_bags + 1
  std::vector<double> label_sums;

  int num_bags() const { return static_cast<int>(label_sums.size()); }
  int total_instances() const { return static_cast<int>(inputs.size()); }
  int bag_size(int b) const {
    return offsets[static_cast<std::size_t>(b) + 1] - offsets[static_cast<std::size_t>(b)];
  }
  double proportion(int b) const {
    return label_sums[static_cast<std::size_t>(b)] / static_cast<double>(bag_size(b));
  }

  static BagBatch gather(const std::vector<SparseVec>& encoded, const BagCollection& coll,
                         std::span<const std::int64_t> bag_ids) {
    BagBatch batch;
    batch.offsets.push_back(0);
    for (std::int64_t id : bag_ids) {
      const Bag& bag = coll.bags[static_cast<std::size_t>(id)];
      for (std::int64_t i : bag.members) {
        batch.inputs.push_back(&encoded[static_cast<std::size_t>(i)]);
        batch.instance_ids.push_back(i);
      }
      batch.offsets.push_back(static_cast<std::int32_t>(batch.inputs.size()));
      batch.label_sums.push_back(bag.label_sum);
    }
    return batch;
  }
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> dpred;
};

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

inline double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline void check_preds(const BagBatch& batch, const std::vector<double>& preds) {
  if (preds.size() != static_cast<std::size_t>(batch.total_instances())) {
    throw ValidationError("loss: predictions not aligned with batch instances");
  }
}

}  // namespace detail

// BCE between the true and predicted bag label proportions, summed over the
// batch's bags. Gradient spreads uniformly over the members.
inline LossResult dllp_bce(const BagBatch& batch, const std::vector<double>& preds) {
  detail::check_preds(batch, preds);
  LossResult res;
  res.dpred.assign(preds.size(), 0.0);
  for (int b = 0; b < batch.num_bags(); ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    const double k = static_cast<double>(hi - lo);
    double zhat = 0.0;
    for (int i = lo; i < hi; ++i) zhat += preds[static_cast<std::size_t>(i)];
    zhat = detail::clamp_prob(zhat / k);
    const double z = batch.proportion(b);
    res.loss += -(z * std::log(zhat) + (1.0 - z) * std::log(1.0 - zhat));
    const double dz = (-z / zhat + (1.0 - z) / (1.0 - zhat)) / k;
    for (int i = lo; i < hi; ++i) res.dpred[static_cast<std::size_t>(i)] += dz;
  }
  return res;
}

// Squared / absolute error on the bag label SUMS, summed over bags.
inline LossResult dllp_mse(const BagBatch& batch, const std::vector<double>& preds) {
  detail::check_preds(batch, preds);
  LossResult res;
  res.dpred.assign(preds.size(), 0.0);
  for (int b = 0; b < batch.num_bags(); ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    double yhat = 0.0;
    for (int i = lo; i < hi; ++i) yhat += preds[static_cast<std::size_t>(i)];
    const double diff = yhat - batch.label_sums[static_cast<std::size_t>(b)];
    res.loss += diff * diff;
    for (int i = lo; i < hi; ++i) res.dpred[static_cast<std::size_t>(i)] += 2.0 * diff;
  }
  return res;
}

inline LossResult dllp_mae(const BagBatch& batch, const std::vector<double>& preds) {
  detail::check_preds(batch, preds);
  LossResult res;
  res.dpred.assign(preds.size(), 0.0);
  for (int b = 0; b < batch.num_bags(); ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    double yhat = 0.0;
    for (int i = lo; i < hi; ++i) yhat += preds[static_cast<std::size_t>(i)];
    const double diff = yhat - batch.label_sums[static_cast<std::size_t>(b)];
    res.loss += std::abs(diff);
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    for (int i = lo; i < hi; ++i) res.dpred[static_cast<std::size_t>(i)] += sign;
  }
  return res;
}

// ---------------------------------------------------------------------------
// GenBags: random Gaussian combinations of per-bag proportion residuals.
// Bags are grouped into blocks of 4; each block receives `draws` weight
// vectors from N(0, Sigma) with unit diagonal and -1/3 off-diagonal. Sigma's
// null space is the all-ones direction, so each w sums to zero.

constexpr int kGenBagsBlock = 4;
constexpr int kGenBagsDraws = 60;

using GenBagsWeights = std::vector<std::array<double, kGenBagsBlock>>;

inline GenBagsWeights draw_genbags_weights(Rng& rng, int n_blocks, int draws = kGenBagsDraws) {
  GenBagsWeights ws;
  ws.reserve(static_cast<std::size_t>(n_blocks) * static_cast<std::size_t>(draws));
  const double scale = std::sqrt(4.0 / 3.0);
  for (int b = 0; b < n_blocks * draws; ++b) {
    std::array<double, kGenBagsBlock> g{};
    double mean = 0.0;
    for (auto& x : g) {
      x = rng.normal();
      mean += x;
    }
    mean /= kGenBagsBlock;
    for (auto& x : g) x = scale * (x - mean);
    ws.push_back(g);
  }
  return ws;
}

inline LossResult genbags_loss_with_weights(const BagBatch& batch,
                                            const std::vector<double>& preds,
                                            const GenBagsWeights& weights) {
  detail::check_preds(batch, preds);
  const int n_blocks = batch.num_bags() / kGenBagsBlock;  // partial block dropped
  if (n_blocks < 1) throw ValidationError("genbags: need at least 4 bags in the batch");
  const int draws = static_cast<int>(weights.size()) / n_blocks;
  if (draws * n_blocks != static_cast<int>(weights.size())) {
    throw ValidationError("genbags: weights not divisible into blocks");
  }

  std::vector<double> residual(static_cast<std::size_t>(batch.num_bags()), 0.0);
  for (int b = 0; b < n_blocks * kGenBagsBlock; ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    double zhat = 0.0;
    for (int i = lo; i < hi; ++i) zhat += preds[static_cast<std::size_t>(i)];
    zhat /= static_cast<double>(hi - lo);
    residual[static_cast<std::size_t>(b)] = batch.proportion(b) - zhat;
  }

  LossResult res;
  res.dpred.assign(preds.size(), 0.0);
  const double total = static_cast<double>(n_blocks * draws);
  std::vector<double> dresidual(static_cast<std::size_t>(batch.num_bags()), 0.0);
  for (int blk = 0; blk < n_blocks; ++blk) {
    for (int d = 0; d < draws; ++d) {
      const auto& w = weights[static_cast<std::size_t>(blk * draws + d)];
      double r = 0.0;
      for (int j = 0; j < kGenBagsBlock; ++j) {
        r += w[static_cast<std::size_t>(j)] * residual[static_cast<std::size_t>(blk * kGenBagsBlock + j)];
      }
      res.loss += r * r / total;
      for (int j = 0; j < kGenBagsBlock; ++j) {
        dresidual[static_cast<std::size_t>(blk * kGenBagsBlock + j)] +=
            2.0 * r * w[static_cast<std::size_t>(j)] / total;
      }
    }
  }
  for (int b = 0; b < n_blocks * kGenBagsBlock; ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    const double d = -dresidual[static_cast<std::size_t>(b)] / static_cast<double>(hi - lo);
    for (int i = lo; i < hi; ++i) res.dpred[static_cast<std::size_t>(i)] += d;
  }
  return res;
}

inline LossResult genbags_loss(const BagBatch& batch, const std::vector<double>& preds,
                               Rng& rng) {
  const int n_blocks = batch.num_bags() / kGenBagsBlock;
  if (n_blocks < 1) throw ValidationError("genbags: need at least 4 bags in the batch");
  return genbags_loss_with_weights(batch, preds, draw_genbags_weights(rng, n_blocks));
}

// ---------------------------------------------------------------------------
// Easy-LLP: per-instance soft surrogate s = |B| (z_B - p) + p, deliberately
// not clipped to [0,1] (the estimator is unbiased only for the raw value).
// Loss is the mean per-instance BCE instantiated with s.
inline LossResult easyllp_loss(const BagBatch& batch, const std::vector<double>& preds,
                               double prior) {
  detail::check_preds(batch, preds);
  LossResult res;
  res.dpred.assign(preds.size(), 0.0);
  const double n = static_cast<double>(batch.total_instances());
  for (int b = 0; b < batch.num_bags(); ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    const double k = static_cast<double>(hi - lo);
    const double s = k * (batch.proportion(b) - prior) + prior;
    for (int i = lo; i < hi; ++i) {
      const double p = detail::clamp_prob(preds[static_cast<std::size_t>(i)]);
      res.loss += (s * -std::log(p) + (1.0 - s) * -std::log(1.0 - p)) / n;
      res.dpred[static_cast<std::size_t>(i)] += (-s / p + (1.0 - s) / (1.0 - p)) / n;
    }
  }
  return res;
}

inline double easyllp_surrogate(double bag_size, double bag_proportion, double prior) {
  return bag_size * (bag_proportion - prior) + prior;
}

// ---------------------------------------------------------------------------
// SIM-LLP: DLLP loss plus a similarity penalty over a sampled set of feature
// vectors. The weight uses exp(-||x_i - x_j||^2); the printed form without
// the negation grows without bound for distant pairs and contradicts the
// role of the term (near-identical inputs should be pushed to agree), so the
// negated exponent is used.
struct SimPairs {
  struct Pair {
    int a = 0, b = 0;
    double weight = 0.0;
  };
  std::vector<Pair> pairs;
};

inline SimPairs sample_simllp_pairs(const BagBatch& batch, Rng& rng, int sample_size = 400) {
  const int n = batch.total_instances();
  std::vector<int> slots(static_cast<std::size_t>(n));
  std::iota(slots.begin(), slots.end(), 0);
  rng.shuffle(slots);
  const int s = std::min(sample_size, n);
  SimPairs out;
  for (int i = 0; i < s; ++i) {
    for (int j = i + 1; j < s; ++j) {
      SimPairs::Pair p;
      p.a = slots[static_cast<std::size_t>(i)];
      p.b = slots[static_cast<std::size_t>(j)];
      p.weight = std::exp(-sq_dist(*batch.inputs[static_cast<std::size_t>(p.a)],
                                   *batch.inputs[static_cast<std::size_t>(p.b)]));
      out.pairs.push_back(p);
    }
  }
  return out;
}

enum class SimBase { Bce, Mse };

inline LossResult simllp_loss(const BagBatch& batch, const std::vector<double>& preds,
                              const SimPairs& pairs, double lambda,
                              SimBase base = SimBase::Bce) {
  LossResult res = base == SimBase::Bce ? dllp_bce(batch, preds) : dllp_mse(batch, preds);
  if (pairs.pairs.empty() || lambda == 0.0) return res;
  const double np = static_cast<double>(pairs.pairs.size());
  for (const auto& pr : pairs.pairs) {
    const double diff =
        preds[static_cast<std::size_t>(pr.a)] - preds[static_cast<std::size_t>(pr.b)];
    res.loss += lambda * pr.weight * diff * diff / np;
    const double d = lambda * pr.weight * 2.0 * diff / np;
    res.dpred[static_cast<std::size_t>(pr.a)] += d;
    res.dpred[static_cast<std::size_t>(pr.b)] -= d;
  }
  return res;
}

inline LossResult simllp_loss(const BagBatch& batch, const std::vector<double>& preds, Rng& rng,
                              double lambda = 1.0, int sample_size = 400,
                              SimBase base = SimBase::Bce) {
  return simllp_loss(batch, preds, sample_simllp_pairs(batch, rng, sample_size), lambda, base);
}

// ---------------------------------------------------------------------------
// Mean-Map, two steps. Step 1 computes the bag-weighted positive-mass
// statistic (the per-bag label proportions); step 2 optimizes the
// exponential-family objective with the linear score generalized to the
// model logit: mean_i [softplus(f_i) - z_B(i) f_i]. The predictions passed
// in are logits (identity head).
inline std::vector<double> meanmap_mu(const BagCollection& coll) {
  std::vector<double> z;
  z.reserve(coll.bags.size());
  for (const auto& b : coll.bags) z.push_back(b.proportion());
  return z;
}

inline LossResult meanmap_loss(const BagBatch& batch, const std::vector<double>& logits) {
  detail::check_preds(batch, logits);
  LossResult res;
  res.dpred.assign(logits.size(), 0.0);
  const double n = static_cast<double>(batch.total_instances());
  for (int b = 0; b < batch.num_bags(); ++b) {
    const int lo = batch.offsets[static_cast<std::size_t>(b)];
    const int hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    const double z = batch.proportion(b);
    for (int i = lo; i < hi; ++i) {
      const double f = logits[static_cast<std::size_t>(i)];
      res.loss += (detail::softplus(f) - z * f) / n;
      res.dpred[static_cast<std::size_t>(i)] += (sigmoid(f) - z) / n;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Optimal-transport pseudo-labels.

struct PseudoLabels {
  std::vector<double> labels;
  bool hard = false;
};

// Non-regularized OT over one disjoint bag: the y_B highest-scoring members
// get label 1. Ties broken by instance index (earlier slot wins).
inline PseudoLabels ot_greedy_pseudolabels(std::span<const double> preds, double label_sum) {
  const int k = static_cast<int>(preds.size());
  const double rounded = std::round(label_sum);
  if (std::abs(label_sum - rounded) > 1e-9 || rounded < 0.0 || rounded > k) {
    throw ValidationError("ot_greedy: label sum must be an integer in [0, |B|]");
  }
  const int y = static_cast<int>(rounded);
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)] > preds[static_cast<std::size_t>(b)];
  });
  PseudoLabels out;
  out.hard = true;
  out.labels.assign(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < y; ++i) out.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1.0;
  return out;
}

enum class SinkhornMode { Hard, Soft };

// Entropic OT between the bag's instances (uniform marginal 1/|B|) and the
// classes {0,1} (marginal (1-z, z)); cost(i,c) = -log Pr[c | pred_i]. With
// two classes the Sinkhorn fixed point has a closed structure: writing the
// scaling potentials as a single class-split t = eps * log(v1/v0), the row
// constraint forces P(i,1) = (1/|B|) sigmoid(s_i + t) with
// s_i = (cost(i,0) - cost(i,1)) / eps, and the class constraint becomes a
// monotone scalar equation in t. The alternating row/column scaling is the
// fixed-point iteration for that equation; it is solved here by bisection,
// which meets any tolerance regardless of kernel conditioning. Both marginals
// hold at return: rows by parametrization, classes to `tol`.
inline PseudoLabels sinkhorn_pseudolabels(std::span<const double> preds, double label_sum,
                                          double epsilon_reg = 0.1, int iters = 200,
                                          SinkhornMode mode = SinkhornMode::Soft,
                                          double tol = 1e-6) {
  if (epsilon_reg <= 0.0) throw ValidationError("sinkhorn: epsilon_reg must be positive");
  const int k = static_cast<int>(preds.size());
  const double z = label_sum / static_cast<double>(k);
  PseudoLabels out;
  out.hard = mode == SinkhornMode::Hard;
  if (z <= 0.0 || z >= 1.0) {  // exact degenerate marginals, no iteration
    out.labels.assign(static_cast<std::size_t>(k), z >= 1.0 ? 1.0 : 0.0);
    return out;
  }

  std::vector<double> s(static_cast<std::size_t>(k));
  double span = 0.0;
  for (int i = 0; i < k; ++i) {
    const double p = detail::clamp_prob(preds[static_cast<std::size_t>(i)]);
    s[static_cast<std::size_t>(i)] = (std::log(p) - std::log(1.0 - p)) / epsilon_reg;
    span = std::max(span, std::abs(s[static_cast<std::size_t>(i)]));
  }
  const double target = label_sum;  // sum of sigmoid(s_i + t) at the solution
  auto class_mass = [&](double t) {
    double mass = 0.0;
    for (int i = 0; i < k; ++i) {
      mass += 1.0 / (1.0 + std::exp(-(s[static_cast<std::size_t>(i)] + t)));
    }
    return mass;
  };
  double lo = -span - 50.0, hi = span + 50.0;
  for (int it = 0; it < std::max(iters, 200); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mass = class_mass(mid);
    if (std::abs(mass - target) < tol * 0.5) {
      lo = hi = mid;
      break;
    }
    if (mass < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double t = 0.5 * (lo + hi);

  out.labels.assign(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    const double soft = 1.0 / (1.0 + std::exp(-(s[static_cast<std::size_t>(i)] + t)));
    out.labels[static_cast<std::size_t>(i)] =
        mode == SinkhornMode::Hard ? (soft > 0.5 ? 1.0 : 0.0) : soft;
  }
  return out;
}

// Mean per-instance BCE against (hard or soft) pseudo-labels.
inline LossResult pseudo_label_bce(const std::vector<double>& preds, const PseudoLabels& pseudo) {
  if (preds.size() != pseudo.labels.size()) {
    throw ValidationError("pseudo_label_bce: size mismatch");
  }
  LossResult res;
  res.dpred.assign(preds.size(), 0.0);
  const double n = static_cast<double>(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = detail::clamp_prob(preds[i]);
    const double t = pseudo.labels[i];
    res.loss += (t * -std::log(p) + (1.0 - t) * -std::log(1.0 - p)) / n;
    res.dpred[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
  }
  return res;
}

}  // namespace llpbench
