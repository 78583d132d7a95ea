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
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "llpbench/common.hpp"
#include "llpbench/hardness.hpp"

namespace llpbench {

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centers;
  double inertia = 0.0;
  std::vector<double> objective_history;  // non-increasing by construction
};

namespace detail {

inline double sq_dist_dense(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Lloyd's iteration with k-means++ seeding. The points are canonicalized by
// sorting before seeding, so the partition depends only on the multiset of
// points and the seed, not on their order.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                           std::uint64_t seed, int max_iters = 100) {
  if (points.empty()) throw ValidationError("kmeans: no points");
  const std::size_t n = points.size();
  {
    std::set<std::vector<double>> distinct(points.begin(), points.end());
    if (k < 1 || static_cast<std::size_t>(k) > distinct.size()) {
      throw ValidationError("kmeans: k must be in [1, number of distinct points]");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

  Rng rng(seed);
  // k-means++ over the canonical order.
  std::vector<std::vector<double>> centers;
  centers.push_back(points[order[rng.below(n)]]);
  std::vector<double> d2(n, 0.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, detail::sq_dist_dense(points[order[i]], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
      // A zero-distance point can be hit by rounding; move to the next
      // distinct one so centers stay distinct.
      while (d2[pick] == 0.0) pick = (pick + 1) % n;
    } else {
      throw ValidationError("kmeans: fewer distinct points than k");  // unreachable post-check
    }
    centers.push_back(points[order[pick]]);
  }

  std::vector<int> assign(n, 0);
  KMeansResult res;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = detail::sq_dist_dense(points[order[i]], centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      if (assign[i] != best_c) changed = true;
      assign[i] = best_c;
      obj += best_d;
    }
    if (obj > prev_obj + 1e-9 * std::max(1.0, prev_obj)) {
      throw ValidationError("kmeans: objective increased");  // invariant guard
    }
    prev_obj = obj;
    res.objective_history.push_back(obj);
    if (!changed && iter > 0) break;

    // Recompute centers; an emptied cluster grabs the point farthest from
    // its center (deterministic: first farthest in canonical order).
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(points[0].size(), 0.0));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = points[order[i]];
      auto& s = sums[static_cast<std::size_t>(assign[i])];
      for (std::size_t e = 0; e < p.size(); ++e) s[e] += p[e];
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = detail::sq_dist_dense(points[order[i]],
                                                 centers[static_cast<std::size_t>(assign[i])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[static_cast<std::size_t>(c)] = points[order[far]];
        assign[far] = c;
      } else {
        auto& ctr = centers[static_cast<std::size_t>(c)];
        for (std::size_t e = 0; e < ctr.size(); ++e) {
          ctr[e] = sums[static_cast<std::size_t>(c)][e] /
                   static_cast<double>(counts[static_cast<std::size_t>(c)]);
        }
      }
    }
  }

  res.centers = std::move(centers);
  res.inertia = prev_obj;
  res.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.assignment[order[i]] = assign[i];
  return res;
}

// Cluster assignment with qualitative names attached in increasing order of
// the axis' ordering statistic.
struct ClusterAssignment {
  std::map<std::string, int> cluster_of;   // dataset_id -> cluster index
  std::vector<std::string> names;          // cluster index -> name
  KMeansResult raw;
};

enum class ClusterAxis { TailSize, LabelVariation, BagSeparation };

inline std::string cluster_axis_name(ClusterAxis a) {
  switch (a) {
    case ClusterAxis::TailSize: return "tail_size";
    case ClusterAxis::LabelVariation: return "label_variation";
    case ClusterAxis::BagSeparation: return "bag_separation";
  }
  return "?";
}

inline ClusterAxis parse_cluster_axis(const std::string& s) {
  if (s == "tail_size") return ClusterAxis::TailSize;
  if (s == "label_variation") return ClusterAxis::LabelVariation;
  if (s == "bag_separation") return ClusterAxis::BagSeparation;
  throw ValidationError("unknown cluster axis: " + s);
}

inline std::vector<std::string> default_cluster_names(ClusterAxis axis, int k) {
  std::vector<std::string> base;
  switch (axis) {
    case ClusterAxis::TailSize:
      base = k == 3 ? std::vector<std::string>{"short-tailed", "medium-tailed", "long-tailed"}
                    : std::vector<std::string>{"very short-tailed", "short-tailed", "long-tailed",
                                               "very long-tailed"};
      break;
    case ClusterAxis::LabelVariation:
      base = k == 3 ? std::vector<std::string>{"low", "medium", "high"}
                    : std::vector<std::string>{"low", "medium", "high", "very high"};
      break;
    case ClusterAxis::BagSeparation:
      base = k == 3 ? std::vector<std::string>{"less-separated", "medium-separated",
                                               "well-separated"}
                    : std::vector<std::string>{"less-separated", "medium-separated",
                                               "well-separated", "far-separated"};
      break;
  }
  std::vector<std::string> names(base.begin(), base.begin() + std::min<std::size_t>(
                                                                  base.size(),
                                                                  static_cast<std::size_t>(k)));
  while (static_cast<int>(names.size()) < k) {
    names.push_back(cluster_axis_name(axis) + "-tier-" + std::to_string(names.size() + 1));
  }
  return names;
}

namespace detail {

// Rank clusters by their mean ordering statistic (ties by cluster index) and
// attach names so that name order follows the statistic.
inline ClusterAssignment named_assignment(const std::vector<std::string>& ids,
                                          const KMeansResult& raw,
                                          const std::vector<double>& ordering_stat, int k,
                                          std::vector<std::string> names) {
  std::vector<double> cluster_mean(static_cast<std::size_t>(k), 0.0);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    cluster_mean[static_cast<std::size_t>(raw.assignment[i])] += ordering_stat[i];
    ++counts[static_cast<std::size_t>(raw.assignment[i])];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      cluster_mean[static_cast<std::size_t>(c)] /=
          static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
  std::vector<int> rank(static_cast<std::size_t>(k));
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
    return cluster_mean[static_cast<std::size_t>(a)] < cluster_mean[static_cast<std::size_t>(b)];
  });

  ClusterAssignment out;
  out.raw = raw;
  out.names.resize(static_cast<std::size_t>(k));
  for (int pos = 0; pos < k; ++pos) {
    out.names[static_cast<std::size_t>(rank[static_cast<std::size_t>(pos)])] =
        names[static_cast<std::size_t>(pos)];
  }
  for (std::size_t i = 0; i < ids.size(); ++i) out.cluster_of[ids[i]] = raw.assignment[i];
  return out;
}

inline std::vector<std::vector<double>> zscore_columns(std::vector<std::vector<double>> pts) {
  if (pts.empty()) return pts;
  const std::size_t dim = pts[0].size();
  for (std::size_t e = 0; e < dim; ++e) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[e];
    mean /= static_cast<double>(pts.size());
    double var = 0.0;
    for (const auto& p : pts) var += (p[e] - mean) * (p[e] - mean);
    var /= static_cast<double>(pts.size());
    const double sd = std::sqrt(var);
    for (auto& p : pts) p[e] = sd > 0.0 ? (p[e] - mean) / sd : 0.0;
  }
  return pts;
}

}  // namespace detail

// Tail-size axis: per-dataset percentile 4-tuples, z-scored per coordinate;
// clusters named in increasing order of mean bag size at the 70th percentile.
inline ClusterAssignment classify_tail_size(const std::vector<std::string>& ids,
                                            const std::vector<HardnessReport>& reports, int k,
                                            std::uint64_t seed,
                                            std::vector<std::string> names = {}) {
  if (ids.size() != reports.size()) throw ValidationError("ids/reports size mismatch");
  if (reports.size() < static_cast<std::size_t>(k)) throw ValidationError("need >= k reports");
  std::vector<std::vector<double>> pts;
  std::vector<double> stat;
  for (const auto& r : reports) {
    pts.push_back({static_cast<double>(r.percentile_sizes.at(50)),
                   static_cast<double>(r.percentile_sizes.at(70)),
                   static_cast<double>(r.percentile_sizes.at(85)),
                   static_cast<double>(r.percentile_sizes.at(95))});
    stat.push_back(static_cast<double>(r.percentile_sizes.at(70)));
  }
  const auto raw = kmeans(detail::zscore_columns(pts), k, seed);
  if (names.empty()) names = default_cluster_names(ClusterAxis::TailSize, k);
  return detail::named_assignment(ids, raw, stat, k, std::move(names));
}

inline ClusterAssignment classify_scalar_axis(ClusterAxis axis,
                                              const std::vector<std::string>& ids,
                                              const std::vector<double>& values, int k,
                                              std::uint64_t seed,
                                              std::vector<std::string> names = {}) {
  if (ids.size() != values.size()) throw ValidationError("ids/values size mismatch");
  if (values.size() < static_cast<std::size_t>(k)) throw ValidationError("need >= k values");
  std::vector<std::vector<double>> pts;
  for (double v : values) pts.push_back({v});
  const auto raw = kmeans(pts, k, seed);
  if (names.empty()) names = default_cluster_names(axis, k);
  return detail::named_assignment(ids, raw, values, k, std::move(names));
}

inline ClusterAssignment classify_label_variation(const std::vector<std::string>& ids,
                                                  const std::vector<HardnessReport>& reports,
                                                  int k, std::uint64_t seed,
                                                  std::vector<std::string> names = {}) {
  std::vector<double> values;
  for (const auto& r : reports) values.push_back(r.label_prop_stdev);
  return classify_scalar_axis(ClusterAxis::LabelVariation, ids, values, k, seed,
                              std::move(names));
}

inline ClusterAssignment classify_bag_separation(const std::vector<std::string>& ids,
                                                 const std::vector<HardnessReport>& reports,
                                                 int k, std::uint64_t seed,
                                                 std::vector<std::string> names = {}) {
  std::vector<double> values;
  for (const auto& r : reports) values.push_back(r.sep.ratio);
  return classify_scalar_axis(ClusterAxis::BagSeparation, ids, values, k, seed, std::move(names));
}

}  // namespace llpbench
