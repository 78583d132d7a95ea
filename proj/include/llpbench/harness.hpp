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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "llpbench/bagging.hpp"
#include "llpbench/hardness.hpp"
#include "llpbench/losses.hpp"
#include "llpbench/model.hpp"

namespace llpbench {

// ---------------------------------------------------------------------------
// Evaluation metrics.

// Mann-Whitney AUC: probability a random positive outranks a random negative,
// ties counted 1/2. Computed from exact pair counts so it matches the O(n^2)
// oracle bit for bit.
inline double auc(const std::vector<double>& preds, const std::vector<double>& labels) {
  if (preds.size() != labels.size()) throw ValidationError("auc: size mismatch");
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });
  double pos = 0.0, neg = 0.0;
  for (double y : labels) {
    if (y == 1.0) {
      ++pos;
    } else if (y == 0.0) {
      ++neg;
    } else {
      throw ValidationError("auc: labels must be 0/1");
    }
  }
  if (pos == 0.0 || neg == 0.0) throw ValidationError("auc: both classes must be present");

  double wins = 0.0, ties = 0.0, neg_below = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double grp_pos = 0.0, grp_neg = 0.0;
    while (j < order.size() && preds[order[j]] == preds[order[i]]) {
      if (labels[order[j]] == 1.0) {
        ++grp_pos;
      } else {
        ++grp_neg;
      }
      ++j;
    }
    wins += grp_pos * neg_below;
    ties += grp_pos * grp_neg;
    neg_below += grp_neg;
    i = j;
  }
  return (wins + 0.5 * ties) / (pos * neg);
}

inline double mse(const std::vector<double>& preds, const std::vector<double>& labels) {
  if (preds.size() != labels.size()) throw ValidationError("mse: size mismatch");
  if (preds.empty()) throw ValidationError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - labels[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

inline double accuracy(const std::vector<double>& preds, const std::vector<double>& labels,
                       double threshold = 0.5) {
  if (preds.size() != labels.size()) throw ValidationError("accuracy: size mismatch");
  if (preds.empty()) throw ValidationError("accuracy: empty input");
  std::int64_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double cls = preds[i] >= threshold ? 1.0 : 0.0;
    if (cls == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// Methods and configuration.

enum class MethodId {
  DllpBce,
  DllpMse,
  DllpMae,
  GenBags,
  EasyLlp,
  OtLlp,
  HardErotLlp,
  SoftErotLlp,
  SimLlp,
  MeanMap,
};

inline const std::vector<std::pair<MethodId, std::string>>& method_table() {
  static const std::vector<std::pair<MethodId, std::string>> table = {
      {MethodId::DllpBce, "dllp-bce"},     {MethodId::DllpMse, "dllp-mse"},
      {MethodId::DllpMae, "dllp-mae"},     {MethodId::GenBags, "genbags"},
      {MethodId::EasyLlp, "easy-llp"},     {MethodId::OtLlp, "ot-llp"},
      {MethodId::HardErotLlp, "hard-erot-llp"}, {MethodId::SoftErotLlp, "soft-erot-llp"},
      {MethodId::SimLlp, "sim-llp"},       {MethodId::MeanMap, "mean-map"},
  };
  return table;
}

inline std::string method_name(MethodId m) {
  for (const auto& [id, name] : method_table()) {
    if (id == m) return name;
  }
  return "?";
}

inline MethodId parse_method(const std::string& s) {
  for (const auto& [id, name] : method_table()) {
    if (name == s) return id;
  }
  throw ValidationError("unknown method: " + s);
}

inline bool method_supports_regression(MethodId m) {
  return m == MethodId::DllpMse || m == MethodId::DllpMae || m == MethodId::GenBags ||
         m == MethodId::SimLlp;
}

enum class EvalMetric { Auc, Mse, Accuracy };

inline std::string eval_metric_name(EvalMetric m) {
  switch (m) {
    case EvalMetric::Auc: return "auc";
    case EvalMetric::Mse: return "mse";
    case EvalMetric::Accuracy: return "accuracy";
  }
  return "?";
}

inline EvalMetric parse_eval_metric(const std::string& s) {
  if (s == "auc") return EvalMetric::Auc;
  if (s == "mse") return EvalMetric::Mse;
  if (s == "accuracy") return EvalMetric::Accuracy;
  throw ValidationError("unknown metric: " + s);
}

inline bool metric_higher_is_better(EvalMetric m) { return m != EvalMetric::Mse; }

struct TrainConfig {
  MethodId method = MethodId::DllpBce;
  double lr = 1e-5;
  int bag_batch = 8;
  int patience = 3;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  EvalMetric eval_metric = EvalMetric::Auc;
  EvalMetric monitor = EvalMetric::Accuracy;  // the early-stopping metric
  int hidden1 = 128;
  int hidden2 = 64;
  int instance_batch = 256;
  double simllp_lambda = 1.0;
  int simllp_sample = 400;
  double sinkhorn_eps = 0.1;
  int sinkhorn_iters = 200;
  int ot_finetune_epochs = 10;

  static TrainConfig defaults_for(const InstanceTable& t, MethodId method) {
    TrainConfig c;
    c.method = method;
    if (t.regression()) {
      c.eval_metric = EvalMetric::Mse;
      c.monitor = EvalMetric::Mse;
    }
    return c;
  }
};

// ---------------------------------------------------------------------------
// Folds. Retained instances are shuffled into 5 near-equal test folds; train
// bags are rebuilt per fold following the source collection's provenance.

struct FoldPlan {
  struct Fold {
    std::vector<std::int64_t> train;  // ascending
    std::vector<std::int64_t> test;   // ascending
    BagCollection train_bags;
  };
  std::vector<Fold> folds;
};

inline FoldPlan five_fold_split(const InstanceTable& t, const BagCollection& coll,
                                std::uint64_t seed) {
  if (coll.bags.empty()) throw ValidationError("five_fold_split: empty collection");
  std::vector<std::int64_t> retained;
  for (const auto& b : coll.bags) {
    retained.insert(retained.end(), b.members.begin(), b.members.end());
  }
  std::sort(retained.begin(), retained.end());
  const std::int64_t n = static_cast<std::int64_t>(retained.size());
  if (n < 5) throw ValidationError("five_fold_split: need at least 5 retained instances");

  Rng rng(mix_seed(seed, 0xF01D5));
  rng.shuffle(retained);

  FoldPlan plan;
  const std::int64_t base = n / 5;
  const std::int64_t rem = n % 5;
  std::int64_t start = 0;
  for (int f = 0; f < 5; ++f) {
    const std::int64_t len = base + (f < rem ? 1 : 0);
    FoldPlan::Fold fold;
    fold.test.assign(retained.begin() + start, retained.begin() + start + len);
    fold.train.reserve(static_cast<std::size_t>(n - len));
    fold.train.insert(fold.train.end(), retained.begin(), retained.begin() + start);
    fold.train.insert(fold.train.end(), retained.begin() + start + len, retained.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.train.begin(), fold.train.end());

    BagCollection tb;
    tb.provenance = coll.provenance;
    tb.table_m = coll.table_m;
    tb.table_fingerprint = coll.table_fingerprint;
    switch (coll.provenance.type) {
      case Provenance::Type::Feature:
        tb.bags = detail::feature_bags_of(t, coll.provenance.key, fold.train);
        break;
      case Provenance::Type::Random:
        tb.bags = detail::random_bags_of(t, fold.train, coll.provenance.q,
                                         mix_seed(seed, 0xBA6000 + static_cast<std::uint64_t>(f)));
        break;
      case Provenance::Type::FixedFeature:
        tb.bags = detail::fixed_feature_bags_of(
            t, coll.provenance.key, fold.train, coll.provenance.q,
            mix_seed(seed, 0xBA6000 + static_cast<std::uint64_t>(f)));
        break;
    }
    fold.train_bags = std::move(tb);
    plan.folds.push_back(std::move(fold));
    start += len;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Training.

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_metric = 0.0;
};

struct TrainRun {
  MethodId method = MethodId::DllpBce;
  int fold = 0;
  std::vector<EpochRecord> history;
  int best_epoch = -1;  // -1 means the initial parameters were never improved on
  double best_metric = 0.0;
  double seconds = 0.0;
  ModelParams best_params;
};

namespace detail {

inline std::vector<double> predict(const ModelParams& params,
                                   const std::vector<SparseVec>& encoded,
                                   const std::vector<std::int64_t>& ids, Head head) {
  std::vector<double> preds;
  preds.reserve(ids.size());
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const std::size_t stop = std::min(ids.size(), start + kChunk);
    std::vector<const SparseVec*> chunk;
    chunk.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      chunk.push_back(&encoded[static_cast<std::size_t>(ids[i])]);
    }
    const ForwardCache c = forward(params, chunk, head);
    preds.insert(preds.end(), c.pred.begin(), c.pred.end());
  }
  return preds;
}

inline double evaluate(EvalMetric metric, const std::vector<double>& preds,
                       const std::vector<double>& labels) {
  switch (metric) {
    case EvalMetric::Auc: return auc(preds, labels);
    case EvalMetric::Mse: return mse(preds, labels);
    case EvalMetric::Accuracy: return accuracy(preds, labels);
  }
  throw ValidationError("bad metric");
}

inline std::vector<double> gather_labels(const InstanceTable& t,
                                         const std::vector<std::int64_t>& ids) {
  std::vector<double> out;
  out.reserve(ids.size());
  for (std::int64_t i : ids) out.push_back(t.labels[static_cast<std::size_t>(i)]);
  return out;
}

// Tracks the monitored metric for early stopping and the evaluated metric for
// the returned best state.
struct StopTracker {
  EvalMetric monitor;
  EvalMetric eval;
  int patience;
  double best_monitor = 0.0;
  int stale = 0;
  bool any = false;

  bool improved_monitor(double value) {
    const bool better =
        !any || (metric_higher_is_better(monitor) ? value > best_monitor : value < best_monitor);
    if (better) {
      best_monitor = value;
      stale = 0;
    } else {
      ++stale;
    }
    any = true;
    return better;
  }
  bool should_stop() const { return stale >= patience; }
};

}  // namespace detail

// One epoch's bag visitation order: a seeded permutation, so every bag is
// touched exactly once per epoch.
inline std::vector<std::int64_t> epoch_bag_order(std::int64_t num_bags, Rng& rng) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(num_bags));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return order;
}

namespace detail {

struct MethodState {
  double easyllp_prior = 0.0;
  std::vector<PseudoLabels> pseudo;  // per train bag, OT family phase 2
  bool pseudo_phase = false;
};

inline LossResult batch_loss(const TrainConfig& cfg, const InstanceTable& t, const BagBatch& batch,
                             const std::vector<double>& preds, Rng& rng, const MethodState& state,
                             std::span<const std::int64_t> bag_ids) {
  const SimBase sim_base = t.regression() ? SimBase::Mse : SimBase::Bce;
  switch (cfg.method) {
    case MethodId::DllpBce: return dllp_bce(batch, preds);
    case MethodId::DllpMse: return dllp_mse(batch, preds);
    case MethodId::DllpMae: return dllp_mae(batch, preds);
    case MethodId::GenBags: return genbags_loss(batch, preds, rng);
    case MethodId::EasyLlp: return easyllp_loss(batch, preds, state.easyllp_prior);
    case MethodId::SimLlp:
      return simllp_loss(batch, preds, rng, cfg.simllp_lambda, cfg.simllp_sample, sim_base);
    case MethodId::MeanMap: return meanmap_loss(batch, preds);
    case MethodId::OtLlp:
    case MethodId::HardErotLlp:
    case MethodId::SoftErotLlp: {
      if (!state.pseudo_phase) return dllp_bce(batch, preds);  // pretraining
      PseudoLabels merged;
      for (std::int64_t id : bag_ids) {
        const auto& pl = state.pseudo[static_cast<std::size_t>(id)];
        merged.labels.insert(merged.labels.end(), pl.labels.begin(), pl.labels.end());
      }
      return pseudo_label_bce(preds, merged);
    }
  }
  throw ValidationError("bad method");
}

}  // namespace detail

// Minibatch training on a fold: epochs of ceil(num_bags / b) steps over a
// seeded without-replacement bag order, early stopping on the monitored
// test metric, best-epoch state returned.
inline TrainRun train(const InstanceTable& t, const std::vector<SparseVec>& encoded,
                      const FoldPlan::Fold& fold, const TrainConfig& cfg,
                      std::uint64_t model_seed) {
  if (t.regression() && !method_supports_regression(cfg.method)) {
    throw ValidationError("method " + method_name(cfg.method) +
                          " is not applicable to the regression task");
  }
  if (fold.train_bags.bags.empty()) throw ValidationError("train: no training bags");
  const auto t0 = std::chrono::steady_clock::now();

  const Head train_head =
      t.regression() || cfg.method == MethodId::MeanMap ? Head::Identity : Head::Sigmoid;
  const Head eval_head = t.regression() ? Head::Identity : Head::Sigmoid;

  ModelShape shape;
  shape.input_dim = encoded.empty() ? 0 : encoded.front().dim;
  shape.h1 = cfg.hidden1;
  shape.h2 = cfg.hidden2;
  ModelParams params = init_params(model_seed, shape);
  AdamState adam = AdamState::for_params(params);

  detail::MethodState state;
  if (cfg.method == MethodId::EasyLlp) state.easyllp_prior = label_bias(fold.train_bags);

  const std::vector<double> test_labels = detail::gather_labels(t, fold.test);
  const std::int64_t num_bags = fold.train_bags.num_bags();
  Rng rng(mix_seed(cfg.seed, 0x7e41c0));

  TrainRun run;
  run.method = cfg.method;
  run.best_params = params;
  const bool ot_family = cfg.method == MethodId::OtLlp || cfg.method == MethodId::HardErotLlp ||
                         cfg.method == MethodId::SoftErotLlp;

  double best_eval = 0.0;
  bool have_eval = false;
  auto eval_and_track = [&](int epoch, double train_loss) {
    const std::vector<double> preds = detail::predict(params, encoded, fold.test, eval_head);
    const double metric = detail::evaluate(cfg.eval_metric, preds, test_labels);
    run.history.push_back({epoch, train_loss, metric});
    const bool better = !have_eval || (metric_higher_is_better(cfg.eval_metric)
                                           ? metric > best_eval
                                           : metric < best_eval);
    if (better) {
      best_eval = metric;
      run.best_epoch = epoch;
      run.best_metric = metric;
      run.best_params = params;
      have_eval = true;
    }
    return cfg.monitor == cfg.eval_metric ? metric
                                          : detail::evaluate(cfg.monitor, preds, test_labels);
  };

  auto run_one_epoch = [&](int epoch) {
    const std::vector<std::int64_t> order = epoch_bag_order(num_bags, rng);
    double loss_sum = 0.0;
    std::int64_t steps = 0;
    for (std::int64_t start = 0; start < num_bags; start += cfg.bag_batch) {
      const std::int64_t stop = std::min(num_bags, start + cfg.bag_batch);
      const std::span<const std::int64_t> bag_ids(order.data() + start,
                                                  static_cast<std::size_t>(stop - start));
      BagBatch batch = BagBatch::gather(encoded, fold.train_bags, bag_ids);
      ForwardCache cache = forward(params, batch.inputs, train_head);
      LossResult lr = detail::batch_loss(cfg, t, batch, cache.pred, rng, state, bag_ids);
      loss_sum += lr.loss;
      ++steps;
      const std::vector<double> grad = backward(params, cache, lr.dpred);
      adam_step(params, grad, adam, cfg.lr);
    }
    (void)epoch;
    return steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
  };

  int epoch = 0;
  {
    detail::StopTracker stop{cfg.monitor, cfg.eval_metric, cfg.patience};
    const int phase_epochs = cfg.max_epochs;
    for (int e = 0; e < phase_epochs; ++e, ++epoch) {
      const double train_loss = run_one_epoch(epoch);
      const double monitored = eval_and_track(epoch, train_loss);
      stop.improved_monitor(monitored);
      if (stop.should_stop()) {
        ++epoch;
        break;
      }
    }
  }

  if (ot_family && cfg.max_epochs > 0) {
    // Pseudo-label phase: restart from the best pretrained state, re-label
    // every training bag at each epoch start, then fit one epoch on the
    // surrogate labels. Early stopping restarts for this phase.
    params = run.best_params;
    adam = AdamState::for_params(params);
    state.pseudo_phase = true;
    detail::StopTracker stop{cfg.monitor, cfg.eval_metric, cfg.patience};
    for (int e = 0; e < cfg.ot_finetune_epochs; ++e, ++epoch) {
      state.pseudo.assign(static_cast<std::size_t>(num_bags), PseudoLabels{});
      for (std::int64_t bidx = 0; bidx < num_bags; ++bidx) {
        const Bag& bag = fold.train_bags.bags[static_cast<std::size_t>(bidx)];
        const std::vector<double> preds = detail::predict(params, encoded, bag.members, eval_head);
        switch (cfg.method) {
          case MethodId::OtLlp:
            state.pseudo[static_cast<std::size_t>(bidx)] =
                ot_greedy_pseudolabels(preds, bag.label_sum);
            break;
          case MethodId::HardErotLlp:
            state.pseudo[static_cast<std::size_t>(bidx)] = sinkhorn_pseudolabels(
                preds, bag.label_sum, cfg.sinkhorn_eps, cfg.sinkhorn_iters, SinkhornMode::Hard);
            break;
          default:
            state.pseudo[static_cast<std::size_t>(bidx)] = sinkhorn_pseudolabels(
                preds, bag.label_sum, cfg.sinkhorn_eps, cfg.sinkhorn_iters, SinkhornMode::Soft);
            break;
        }
      }
      const double train_loss = run_one_epoch(epoch);
      const double monitored = eval_and_track(epoch, train_loss);
      stop.improved_monitor(monitored);
      if (stop.should_stop()) {
        ++epoch;
        break;
      }
    }
  }

  if (run.history.empty()) {
    // max_epochs == 0: the initial parameters stand, evaluated once.
    const std::vector<double> preds = detail::predict(params, encoded, fold.test, eval_head);
    run.best_metric = detail::evaluate(cfg.eval_metric, preds, test_labels);
    run.best_epoch = -1;
    run.best_params = params;
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

// Instance-level reference training on a seeded 80:20 split; the performance
// ceiling against which the bag-level methods are compared.
inline TrainRun instance_level_train(const InstanceTable& t,
                                     const std::vector<SparseVec>& encoded,
                                     const TrainConfig& cfg, std::uint64_t model_seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::int64_t> rows(static_cast<std::size_t>(t.m));
  std::iota(rows.begin(), rows.end(), 0);
  Rng split_rng(mix_seed(cfg.seed, 0x8020));
  split_rng.shuffle(rows);
  const std::int64_t n_train = t.m * 8 / 10;
  std::vector<std::int64_t> train_ids(rows.begin(), rows.begin() + n_train);
  std::vector<std::int64_t> test_ids(rows.begin() + n_train, rows.end());
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());

  const Head head = t.regression() ? Head::Identity : Head::Sigmoid;
  ModelShape shape;
  shape.input_dim = encoded.empty() ? 0 : encoded.front().dim;
  shape.h1 = cfg.hidden1;
  shape.h2 = cfg.hidden2;
  ModelParams params = init_params(model_seed, shape);
  AdamState adam = AdamState::for_params(params);
  const std::vector<double> test_labels = detail::gather_labels(t, test_ids);

  Rng rng(mix_seed(cfg.seed, 0x125e7));
  TrainRun run;
  run.method = cfg.method;
  run.best_params = params;
  double best_eval = 0.0;
  bool have_eval = false;
  detail::StopTracker stop{cfg.monitor, cfg.eval_metric, cfg.patience};

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::int64_t> order = train_ids;
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.instance_batch)) {
      const std::size_t stop_i =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.instance_batch));
      std::vector<const SparseVec*> inputs;
      std::vector<double> ys;
      inputs.reserve(stop_i - start);
      for (std::size_t i = start; i < stop_i; ++i) {
        inputs.push_back(&encoded[static_cast<std::size_t>(order[i])]);
        ys.push_back(t.labels[static_cast<std::size_t>(order[i])]);
      }
      ForwardCache cache = forward(params, inputs, head);
      const double n = static_cast<double>(inputs.size());
      std::vector<double> dpred(inputs.size(), 0.0);
      double loss = 0.0;
      if (t.regression()) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          const double d = cache.pred[i] - ys[i];
          loss += d * d / n;
          dpred[i] = 2.0 * d / n;
        }
      } else {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          const double p = detail::clamp_prob(cache.pred[i]);
          loss += (ys[i] * -std::log(p) + (1.0 - ys[i]) * -std::log(1.0 - p)) / n;
          dpred[i] = (-ys[i] / p + (1.0 - ys[i]) / (1.0 - p)) / n;
        }
      }
      loss_sum += loss;
      ++steps;
      const std::vector<double> grad = backward(params, cache, dpred);
      adam_step(params, grad, adam, cfg.lr);
    }

    const std::vector<double> preds = detail::predict(params, encoded, test_ids, head);
    const double metric = detail::evaluate(cfg.eval_metric, preds, test_labels);
    run.history.push_back({epoch, steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0, metric});
    const bool better = !have_eval || (metric_higher_is_better(cfg.eval_metric)
                                           ? metric > best_eval
                                           : metric < best_eval);
    if (better) {
      best_eval = metric;
      run.best_epoch = epoch;
      run.best_metric = metric;
      run.best_params = params;
      have_eval = true;
    }
    const double monitored = cfg.monitor == cfg.eval_metric
                                 ? metric
                                 : detail::evaluate(cfg.monitor, preds, test_labels);
    stop.improved_monitor(monitored);
    if (stop.should_stop()) break;
  }

  if (run.history.empty()) {
    const std::vector<double> preds = detail::predict(params, encoded, test_ids, head);
    run.best_metric = detail::evaluate(cfg.eval_metric, preds, test_labels);
    run.best_epoch = -1;
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

// ---------------------------------------------------------------------------
// TrainRun serialization.

inline nlohmann::ordered_json train_run_json(const TrainRun& run, bool include_timing = false) {
  nlohmann::ordered_json j;
  j["method"] = method_name(run.method);
  j["fold"] = run.fold;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& e : run.history) {
    hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"test_metric", e.test_metric}});
  }
  j["history"] = std::move(hist);
  j["best_epoch"] = run.best_epoch;
  j["best_metric"] = run.best_metric;
  // Wall time breaks byte-stable re-runs; it is recorded only on request.
  j["seconds"] = include_timing ? run.seconds : 0.0;
  return j;
}

}  // namespace llpbench
