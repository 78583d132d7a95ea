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
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "llpbench/bagging.hpp"
#include "llpbench/feature_space.hpp"

namespace llpbench {

enum class DistanceKind { L2, L2Sq };

// Population standard deviation of the bag label proportions.
inline double label_prop_stdev(const BagCollection& coll) {
  if (coll.bags.empty()) throw ValidationError("label_prop_stdev: empty collection");
  double mean = 0.0;
  for (const auto& b : coll.bags) mean += b.proportion();
  mean /= static_cast<double>(coll.bags.size());
  double var = 0.0;
  for (const auto& b : coll.bags) {
    const double d = b.proportion() - mean;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(coll.bags.size()));
}

inline double mean_bag_size(const BagCollection& coll) {
  if (coll.bags.empty()) throw ValidationError("mean_bag_size: empty collection");
  return static_cast<double>(coll.num_instances()) / static_cast<double>(coll.num_bags());
}

// Percentile at level t: smallest bag size s such that the fraction of bags
// of size <= s is at least t/100.
inline std::map<int, std::int64_t> cumu_bag_size_percentiles(
    const BagCollection& coll, const std::vector<int>& levels = {50, 70, 85, 95}) {
  if (coll.bags.empty()) throw ValidationError("percentiles: empty collection");
  std::vector<std::int64_t> sizes;
  sizes.reserve(coll.bags.size());
  for (const auto& b : coll.bags) sizes.push_back(b.size());
  std::sort(sizes.begin(), sizes.end());
  const std::int64_t n = static_cast<std::int64_t>(sizes.size());
  std::map<int, std::int64_t> out;
  for (int t : levels) {
    if (t < 1 || t > 100) throw ValidationError("percentile level out of range");
    const std::int64_t rank = (n * t + 99) / 100;  // ceil(n*t/100), >= 1
    out[t] = sizes[static_cast<std::size_t>(rank - 1)];
  }
  return out;
}

// Label bias: total positives over total instances, across bags.
inline double label_bias(const BagCollection& coll) {
  if (coll.bags.empty()) throw ValidationError("label_bias: empty collection");
  double ysum = 0.0;
  double count = 0.0;
  for (const auto& b : coll.bags) {
    ysum += b.label_sum;
    count += static_cast<double>(b.size());
  }
  return ysum / count;
}

// Unweighted mean of the per-bag label proportions.
inline double avg_label_prop(const BagCollection& coll) {
  if (coll.bags.empty()) throw ValidationError("avg_label_prop: empty collection");
  double s = 0.0;
  for (const auto& b : coll.bags) s += b.proportion();
  return s / static_cast<double>(coll.bags.size());
}

// ---------------------------------------------------------------------------
// Bag separation.

struct BagSepMatrix {
  std::int64_t num_bags = 0;
  std::vector<double> values;  // num_bags * num_bags, row-major

  double at(std::int64_t i, std::int64_t j) const {
    return values[static_cast<std::size_t>(i * num_bags + j)];
  }
};

struct SepStats {
  double mean_inter = 0.0;
  double mean_intra = 0.0;
  double ratio = 0.0;
  bool intra_zero = false;  // ratio is the +inf sentinel when set
};

// Reference oracle: averaged pairwise distance between every pair of bags,
// O(m^2 n). Kept deliberately direct; the fast path below is checked against
// it.
inline BagSepMatrix bag_sep_naive(const FeatureSpace& space, const BagCollection& coll,
                                  DistanceKind d) {
  if (coll.bags.empty()) throw ValidationError("bag_sep_naive: empty collection");
  const std::int64_t M = coll.num_bags();
  std::vector<std::vector<SparseVec>> vecs(static_cast<std::size_t>(M));
  for (std::int64_t k = 0; k < M; ++k) {
    for (std::int64_t i : coll.bags[static_cast<std::size_t>(k)].members) {
      vecs[static_cast<std::size_t>(k)].push_back(space.vec(i));
    }
  }
  BagSepMatrix out;
  out.num_bags = M;
  out.values.assign(static_cast<std::size_t>(M * M), 0.0);
  for (std::int64_t a = 0; a < M; ++a) {
    for (std::int64_t b = 0; b < M; ++b) {
      double s = 0.0;
      for (const auto& x : vecs[static_cast<std::size_t>(a)]) {
        for (const auto& y : vecs[static_cast<std::size_t>(b)]) {
          const double d2 = sq_dist(x, y);
          s += d == DistanceKind::L2Sq ? d2 : std::sqrt(std::max(d2, 0.0));
        }
      }
      out.values[static_cast<std::size_t>(a * M + b)] =
          s / static_cast<double>(vecs[static_cast<std::size_t>(a)].size() *
                                  vecs[static_cast<std::size_t>(b)].size());
    }
  }
  return out;
}

inline SepStats sep_stats_from_matrix(const BagSepMatrix& mat) {
  if (mat.num_bags < 2) throw ValidationError("separation stats need at least 2 bags");
  const std::int64_t M = mat.num_bags;
  double intra = 0.0;
  double inter = 0.0;
  for (std::int64_t a = 0; a < M; ++a) {
    intra += mat.at(a, a);
    double row = 0.0;
    for (std::int64_t b = 0; b < M; ++b) {
      if (b != a) row += mat.at(a, b);
    }
    inter += row / static_cast<double>(M - 1);
  }
  SepStats s;
  s.mean_intra = intra / static_cast<double>(M);
  s.mean_inter = inter / static_cast<double>(M);
  s.intra_zero = s.mean_intra == 0.0;
  s.ratio = s.intra_zero ? std::numeric_limits<double>::infinity() : s.mean_inter / s.mean_intra;
  return s;
}

// Fast squared-Euclidean path: one pass over the instances accumulating the
// per-bag mean vector and mean squared norm, then closed-form combination.
// O(mn + |B|n + |B|).
inline SepStats sep_stats_fast_l2sq(const FeatureSpace& space, const BagCollection& coll) {
  const std::int64_t M = coll.num_bags();
  if (M < 2) throw ValidationError("separation stats need at least 2 bags");
  const std::size_t dim = static_cast<std::size_t>(space.dim());

  std::vector<double> avg_sq_norm(static_cast<std::size_t>(M), 0.0);
  std::vector<std::vector<double>> bag_mean(static_cast<std::size_t>(M));
  for (std::int64_t k = 0; k < M; ++k) {
    const Bag& b = coll.bags[static_cast<std::size_t>(k)];
    auto& mean = bag_mean[static_cast<std::size_t>(k)];
    mean.assign(dim, 0.0);
    double sq = 0.0;
    for (std::int64_t i : b.members) {
      const SparseVec v = space.vec(i);
      sq += v.sq_norm();
      for (std::size_t e = 0; e < v.idx.size(); ++e) {
        mean[static_cast<std::size_t>(v.idx[e])] += v.val[e];
      }
    }
    const double inv = 1.0 / static_cast<double>(b.size());
    avg_sq_norm[static_cast<std::size_t>(k)] = sq * inv;
    for (double& x : mean) x *= inv;
  }

  double mean_intra = 0.0;
  double sum_avg_sq_norm = 0.0;
  double sum_mean_norms = 0.0;
  std::vector<double> sum_means(dim, 0.0);
  for (std::int64_t k = 0; k < M; ++k) {
    const auto& mean = bag_mean[static_cast<std::size_t>(k)];
    double mean_norm = 0.0;
    for (std::size_t e = 0; e < dim; ++e) {
      mean_norm += mean[e] * mean[e];
      sum_means[e] += mean[e];
    }
    mean_intra += 2.0 * (avg_sq_norm[static_cast<std::size_t>(k)] - mean_norm);
    sum_avg_sq_norm += avg_sq_norm[static_cast<std::size_t>(k)];
    sum_mean_norms += mean_norm;
  }
  double sum_means_norm = 0.0;
  for (double x : sum_means) sum_means_norm += x * x;

  SepStats s;
  s.mean_intra = mean_intra / static_cast<double>(M);
  s.mean_inter = 2.0 / static_cast<double>(M) * sum_avg_sq_norm -
                 2.0 / static_cast<double>(M * (M - 1)) * (sum_means_norm - sum_mean_norms);
  s.intra_zero = s.mean_intra == 0.0;
  s.ratio = s.intra_zero ? std::numeric_limits<double>::infinity() : s.mean_inter / s.mean_intra;
  return s;
}

// ---------------------------------------------------------------------------
// Cramer's V between bag membership and the binary label.

struct CramersV {
  double chi_sq = 0.0;
  double v = 0.0;
};

inline CramersV cramers_v(const BagCollection& coll, const std::vector<double>& labels) {
  if (coll.num_bags() < 2) throw ValidationError("cramers_v: need at least 2 bags");
  double n = 0.0;
  double col1 = 0.0;  // total positives
  for (const auto& b : coll.bags) {
    if (b.members.empty()) throw ValidationError("cramers_v: empty bag");
    for (std::int64_t i : b.members) {
      const double y = labels[static_cast<std::size_t>(i)];
      if (y != 0.0 && y != 1.0) throw ValidationError("cramers_v: labels must be binary");
      col1 += y;
    }
    n += static_cast<double>(b.size());
  }
  const double col0 = n - col1;
  CramersV out;
  if (col0 == 0.0 || col1 == 0.0) return out;  // a class is absent: degenerate, V := 0
  for (const auto& b : coll.bags) {
    double o1 = 0.0;
    for (std::int64_t i : b.members) o1 += labels[static_cast<std::size_t>(i)];
    const double o0 = static_cast<double>(b.size()) - o1;
    const double e0 = static_cast<double>(b.size()) * col0 / n;
    const double e1 = static_cast<double>(b.size()) * col1 / n;
    if (e0 > 0.0) out.chi_sq += (o0 - e0) * (o0 - e0) / e0;
    if (e1 > 0.0) out.chi_sq += (o1 - e1) * (o1 - e1) / e1;
  }
  // rows = bags (>= 2), columns = 2, so min(r-1, c-1) = 1.
  out.v = std::sqrt(out.chi_sq / n);
  return out;
}

// Fraction of all table instances lying in bags above the high threshold
// whose label proportion is below eps or above 1-eps.
inline double skewed_large_bag_fraction(const InstanceTable& t, const BagCollection& coll,
                                        std::int64_t high, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ValidationError("eps must be in (0, 0.5)");
  if (t.m == 0) return 0.0;
  std::int64_t hit = 0;
  for (const auto& b : coll.bags) {
    if (b.size() <= high) continue;
    const double z = b.proportion();
    if (z < eps || z > 1.0 - eps) hit += b.size();
  }
  return static_cast<double>(hit) / static_cast<double>(t.m);
}

// ---------------------------------------------------------------------------
// Report assembly and serialization.

struct HardnessReport {
  std::string dataset_id;
  std::int64_t num_bags = 0;
  std::int64_t num_instances = 0;
  double mean_bag_size = 0.0;
  double label_prop_stdev = 0.0;
  std::map<int, std::int64_t> percentile_sizes;
  SepStats sep;
  double label_bias = 0.0;
  double avg_label_prop = 0.0;
  CramersV cramers;  // NaN fields for regression tables
  std::string feature_space_mode;
};

inline HardnessReport compute_hardness_report(const InstanceTable& t, const BagCollection& coll,
                                              const FeatureSpace& space,
                                              const std::string& dataset_id) {
  if (coll.bags.empty()) throw ValidationError("hardness report: empty collection");
  HardnessReport r;
  r.dataset_id = dataset_id;
  r.num_bags = coll.num_bags();
  r.num_instances = coll.num_instances();
  r.mean_bag_size = mean_bag_size(coll);
  r.label_prop_stdev = label_prop_stdev(coll);
  r.percentile_sizes = cumu_bag_size_percentiles(coll);
  r.sep = sep_stats_fast_l2sq(space, coll);
  r.label_bias = label_bias(coll);
  r.avg_label_prop = avg_label_prop(coll);
  if (t.regression()) {
    r.cramers.chi_sq = std::numeric_limits<double>::quiet_NaN();
    r.cramers.v = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.cramers = cramers_v(coll, t.labels);
  }
  r.feature_space_mode = space.kind_name();
  return r;
}

inline nlohmann::ordered_json hardness_report_json(const HardnessReport& r) {
  nlohmann::ordered_json j;
  j["dataset_id"] = r.dataset_id;
  j["num_bags"] = r.num_bags;
  j["num_instances"] = r.num_instances;
  j["mean_bag_size"] = r.mean_bag_size;
  j["label_prop_stdev"] = r.label_prop_stdev;
  nlohmann::ordered_json pct;
  for (const auto& [level, size] : r.percentile_sizes) pct[std::to_string(level)] = size;
  j["percentile_sizes"] = std::move(pct);
  j["sep"] = {{"mean_inter", r.sep.mean_inter},
              {"mean_intra", r.sep.mean_intra},
              {"ratio", r.sep.intra_zero ? "inf" : format_number(r.sep.ratio)},
              {"intra_zero", r.sep.intra_zero}};
  j["label_bias"] = r.label_bias;
  j["avg_label_prop"] = r.avg_label_prop;
  if (std::isnan(r.cramers.v)) {
    j["cramers_v"] = nullptr;
  } else {
    j["cramers_v"] = {{"chi_sq", r.cramers.chi_sq}, {"v", r.cramers.v}};
  }
  j["feature_space_mode"] = r.feature_space_mode;
  return j;
}

inline const char* kHardnessCsvHeader =
    "dataset_id,num_bags,num_instances,mean_bag_size,label_prop_stdev,pct50,pct70,pct85,pct95,"
    "mean_inter,mean_intra,inter_intra_ratio,label_bias,avg_label_prop,cramers_v";

inline std::string hardness_report_csv_row(const HardnessReport& r) {
  std::string row = r.dataset_id;
  row += ',' + std::to_string(r.num_bags);
  row += ',' + std::to_string(r.num_instances);
  row += ',' + format_number(r.mean_bag_size);
  row += ',' + format_number(r.label_prop_stdev);
  for (int level : {50, 70, 85, 95}) row += ',' + std::to_string(r.percentile_sizes.at(level));
  row += ',' + format_number(r.sep.mean_inter);
  row += ',' + format_number(r.sep.mean_intra);
  row += ',' + format_number(r.sep.ratio);
  row += ',' + format_number(r.label_bias);
  row += ',' + format_number(r.avg_label_prop);
  row += ',' + format_number(r.cramers.v);
  return row;
}

inline HardnessReport hardness_report_from_csv_row(const std::string& line) {
  auto cells = split_csv_line(line, ',');
  if (cells.size() != 15) throw ValidationError("hardness csv row: expected 15 columns");
  auto num = [&](std::size_t i) { return detail::parse_double(cells[i].value_or("nan"), "metric"); };
  HardnessReport r;
  r.dataset_id = cells[0].value_or("");
  r.num_bags = static_cast<std::int64_t>(num(1));
  r.num_instances = static_cast<std::int64_t>(num(2));
  r.mean_bag_size = num(3);
  r.label_prop_stdev = num(4);
  r.percentile_sizes[50] = static_cast<std::int64_t>(num(5));
  r.percentile_sizes[70] = static_cast<std::int64_t>(num(6));
  r.percentile_sizes[85] = static_cast<std::int64_t>(num(7));
  r.percentile_sizes[95] = static_cast<std::int64_t>(num(8));
  r.sep.mean_inter = num(9);
  r.sep.mean_intra = num(10);
  r.sep.ratio = num(11);
  r.sep.intra_zero = std::isinf(r.sep.ratio);
  r.label_bias = num(12);
  r.avg_label_prop = num(13);
  r.cramers.v = num(14);
  return r;
}

}  // namespace llpbench
