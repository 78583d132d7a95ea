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
#include <doctest.h>

#include <cmath>

#include "llpbench/hardness.hpp"
#include "testutil.hpp"

using namespace llpbench;

namespace {

// Numeric-only table whose rows are the given points.
InstanceTable points_table(const std::vector<std::vector<double>>& pts,
                           std::vector<double> labels = {}) {
  if (labels.empty()) labels.assign(pts.size(), 0.0);
  InstanceTable t;
  t.m = static_cast<std::int64_t>(pts.size());
  t.n_cat = 0;
  t.n_num = static_cast<int>(pts[0].size());
  for (int c = 0; c < t.n_num; ++c) t.num_names.push_back("N" + std::to_string(c + 1));
  t.label_name = "label";
  for (std::size_t r = 0; r < pts.size(); ++r) {
    for (double v : pts[r]) t.num.push_back(v);
    t.labels.push_back(labels[r]);
  }
  return t;
}

BagCollection bags_of(const InstanceTable& t, const std::vector<std::vector<std::int64_t>>& bags) {
  BagCollection coll;
  coll.table_m = t.m;
  for (const auto& members : bags) {
    Bag b;
    b.members = members;
    b.label_sum = recompute_label_sum(b, t);
    coll.bags.push_back(std::move(b));
  }
  return coll;
}

// Bags described as (positives, size): the first `positives` members of each
// bag carry label 1. Labels for the matching table come from `labels_for`.
BagCollection proportion_bags(const std::vector<std::pair<int, int>>& pos_of_size) {
  BagCollection coll;
  std::int64_t next = 0;
  for (const auto& [pos, size] : pos_of_size) {
    Bag b;
    for (int i = 0; i < size; ++i) b.members.push_back(next++);
    b.label_sum = static_cast<double>(pos);
    coll.bags.push_back(std::move(b));
  }
  coll.table_m = next;
  return coll;
}

std::vector<double> labels_for(const std::vector<std::pair<int, int>>& pos_of_size) {
  std::vector<double> labels;
  for (const auto& [pos, size] : pos_of_size) {
    for (int i = 0; i < size; ++i) labels.push_back(i < pos ? 1.0 : 0.0);
  }
  return labels;
}

}  // namespace

TEST_SUITE("hardness") {

TEST_CASE("label_prop_stdev basics") {
  CHECK(label_prop_stdev(proportion_bags({{0, 2}, {2, 2}})) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(label_prop_stdev(proportion_bags({{1, 2}, {2, 4}, {3, 6}})) == 0.0);
  // proportions {0, 0.5, 1}: population stdev sqrt(1/6)
  CHECK(label_prop_stdev(proportion_bags({{0, 2}, {1, 2}, {2, 2}})) ==
        doctest::Approx(std::sqrt(1.0 / 6.0)).epsilon(1e-12));
  CHECK_THROWS_AS(label_prop_stdev(BagCollection{}), ValidationError);
}

TEST_CASE("mean size and cumulative percentiles") {
  const auto c24 = proportion_bags({{0, 2}, {0, 4}});
  CHECK(mean_bag_size(c24) == 3.0);
  CHECK(cumu_bag_size_percentiles(c24).at(50) == 2);

  std::vector<std::pair<int, int>> spec;
  for (int s = 1; s <= 100; ++s) spec.push_back({0, s});
  const auto pct = cumu_bag_size_percentiles(proportion_bags(spec));
  CHECK(pct.at(50) == 50);
  CHECK(pct.at(70) == 70);
  CHECK(pct.at(85) == 85);
  CHECK(pct.at(95) == 95);

  const auto p1 = cumu_bag_size_percentiles(proportion_bags({{1, 7}}));
  for (int level : {50, 70, 85, 95}) CHECK(p1.at(level) == 7);
}

TEST_CASE("label bias vs average label proportion") {
  const auto all_ones = proportion_bags({{2, 2}, {3, 3}});
  CHECK(label_bias(all_ones) == 1.0);
  CHECK(avg_label_prop(all_ones) == 1.0);

  const auto equal_sizes = proportion_bags({{1, 2}, {0, 2}});
  CHECK(label_bias(equal_sizes) == 0.25);
  CHECK(avg_label_prop(equal_sizes) == 0.25);

  // sizes 1 (prop 1) and 3 (prop 0): bias 0.25 but average proportion 0.5
  const auto skew = proportion_bags({{1, 1}, {0, 3}});
  CHECK(label_bias(skew) == 0.25);
  CHECK(avg_label_prop(skew) == 0.5);
}

TEST_CASE("bag_sep_naive on a hand-computed pair") {
  const InstanceTable t = points_table({{0, 0}, {2, 0}, {4, 0}});
  const FeatureSpace space = FeatureSpace::raw_numeric(t);
  const BagCollection coll = bags_of(t, {{0, 1}, {2}});
  const BagSepMatrix m = bag_sep_naive(space, coll, DistanceKind::L2Sq);
  CHECK(m.at(0, 1) == doctest::Approx(10.0).epsilon(1e-12));  // (16 + 4) / 2
  CHECK(m.at(1, 0) == m.at(0, 1));
  CHECK(m.at(1, 1) == 0.0);

  const InstanceTable same = points_table({{1, 1}, {1, 1}, {1, 1}});
  const FeatureSpace s2 = FeatureSpace::raw_numeric(same);
  const BagSepMatrix m2 = bag_sep_naive(s2, bags_of(same, {{0, 1, 2}}), DistanceKind::L2Sq);
  CHECK(m2.at(0, 0) == 0.0);
}

TEST_CASE("naive matrix is symmetric and non-negative for both distance kinds") {
  Rng rng(41);
  const InstanceTable t = test::random_table(rng, 40, 0, 1, 3);
  const FeatureSpace space = FeatureSpace::raw_numeric(t);
  const BagCollection coll = test::random_partition(rng, t, 6);
  for (DistanceKind d : {DistanceKind::L2, DistanceKind::L2Sq}) {
    const BagSepMatrix m = bag_sep_naive(space, coll, d);
    for (std::int64_t i = 0; i < m.num_bags; ++i) {
      for (std::int64_t j = 0; j < m.num_bags; ++j) {
        CHECK(m.at(i, j) == doctest::Approx(m.at(j, i)).epsilon(1e-12));
        CHECK(m.at(i, j) >= 0.0);
      }
    }
  }
}

TEST_CASE("triangle inequality (l2) and half-triangle (l2 squared)") {
  Rng rng(43);
  for (int round = 0; round < 20; ++round) {
    const InstanceTable t = test::random_table(rng, 30, 0, 1, 2);
    const FeatureSpace space = FeatureSpace::raw_numeric(t);
    const BagCollection coll = test::random_partition(rng, t, 6);
    const BagSepMatrix l2 = bag_sep_naive(space, coll, DistanceKind::L2);
    const BagSepMatrix l2sq = bag_sep_naive(space, coll, DistanceKind::L2Sq);
    const std::int64_t M = coll.num_bags();
    for (std::int64_t a = 0; a < M; ++a) {
      for (std::int64_t b = 0; b < M; ++b) {
        for (std::int64_t c = 0; c < M; ++c) {
          CHECK(l2.at(a, c) <= l2.at(a, b) + l2.at(b, c) + 1e-9);
          CHECK(0.5 * l2sq.at(a, c) <= l2sq.at(a, b) + l2sq.at(b, c) + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("ratio lower bounds: 1/2 for l2, 1/4 for l2 squared") {
  Rng rng(47);
  for (int round = 0; round < 25; ++round) {
    const InstanceTable t = test::random_table(rng, 40, 0, 1, 3);
    const FeatureSpace space = FeatureSpace::raw_numeric(t);
    const BagCollection coll = test::random_partition(rng, t, 8);
    const SepStats l2 = sep_stats_from_matrix(bag_sep_naive(space, coll, DistanceKind::L2));
    const SepStats l2sq = sep_stats_from_matrix(bag_sep_naive(space, coll, DistanceKind::L2Sq));
    if (!l2.intra_zero) CHECK(l2.ratio >= 0.5 - 1e-9);
    if (!l2sq.intra_zero) CHECK(l2sq.ratio >= 0.25 - 1e-9);
  }
}

TEST_CASE("fast path equals the naive oracle") {
  Rng rng(53);
  for (int round = 0; round < 30; ++round) {
    const std::int64_t m = 10 + static_cast<std::int64_t>(rng.below(60));
    const InstanceTable t = test::random_table(rng, m, 2, 4, 2);
    const FeatureSpace space = FeatureSpace::multihot(t);
    const BagCollection coll = test::random_partition(rng, t, 10);
    const SepStats oracle = sep_stats_from_matrix(bag_sep_naive(space, coll, DistanceKind::L2Sq));
    const SepStats fast = sep_stats_fast_l2sq(space, coll);
    CHECK(fast.mean_intra == doctest::Approx(oracle.mean_intra).epsilon(1e-9));
    CHECK(fast.mean_inter == doctest::Approx(oracle.mean_inter).epsilon(1e-9));
  }
}

TEST_CASE("two singleton bags: zero intra separation flags the ratio") {
  const InstanceTable t = points_table({{0}, {2}});
  const FeatureSpace space = FeatureSpace::raw_numeric(t);
  const SepStats s = sep_stats_fast_l2sq(space, bags_of(t, {{0}, {1}}));
  CHECK(s.mean_intra == 0.0);
  CHECK(s.mean_inter == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(s.intra_zero);
  CHECK(std::isinf(s.ratio));
  CHECK_THROWS_AS(sep_stats_fast_l2sq(space, bags_of(t, {{0, 1}})), ValidationError);
}

TEST_CASE("line construction x = {0, 2} vs {1}: oracle and fast path agree at ratio 1") {
  const InstanceTable t = points_table({{0}, {2}, {1}});
  const FeatureSpace space = FeatureSpace::raw_numeric(t);
  const BagCollection coll = bags_of(t, {{0, 1}, {2}});
  const SepStats oracle = sep_stats_from_matrix(bag_sep_naive(space, coll, DistanceKind::L2Sq));
  CHECK(oracle.mean_intra == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracle.mean_inter == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracle.ratio == doctest::Approx(1.0).epsilon(1e-12));
  const SepStats fast = sep_stats_fast_l2sq(space, coll);
  CHECK(fast.mean_intra == doctest::Approx(oracle.mean_intra).epsilon(1e-12));
  CHECK(fast.mean_inter == doctest::Approx(oracle.mean_inter).epsilon(1e-12));
}

TEST_CASE("translation invariance of bag separation") {
  Rng rng(59);
  const InstanceTable t = test::random_table(rng, 30, 0, 1, 2);
  InstanceTable shifted = t;
  for (std::size_t i = 0; i < shifted.num.size(); ++i) shifted.num[i] += 17.5;
  const BagCollection coll = test::random_partition(rng, t, 5);
  const FeatureSpace s1 = FeatureSpace::raw_numeric(t);
  const FeatureSpace s2 = FeatureSpace::raw_numeric(shifted);
  for (DistanceKind d : {DistanceKind::L2, DistanceKind::L2Sq}) {
    const BagSepMatrix m1 = bag_sep_naive(s1, coll, d);
    const BagSepMatrix m2 = bag_sep_naive(s2, coll, d);
    for (std::int64_t i = 0; i < m1.num_bags; ++i) {
      for (std::int64_t j = 0; j < m1.num_bags; ++j) {
        CHECK(m1.at(i, j) == doctest::Approx(m2.at(i, j)).epsilon(1e-6));
      }
    }
  }
  const SepStats f1 = sep_stats_fast_l2sq(s1, coll);
  const SepStats f2 = sep_stats_fast_l2sq(s2, coll);
  CHECK(f1.mean_intra == doctest::Approx(f2.mean_intra).epsilon(1e-6));
  CHECK(f1.mean_inter == doctest::Approx(f2.mean_inter).epsilon(1e-6));
}

TEST_CASE("cramers_v reference tables") {
  {
    // Perfect association: O = [[5,0],[0,5]].
    const std::vector<std::pair<int, int>> spec = {{5, 5}, {0, 5}};
    const CramersV cv = cramers_v(proportion_bags(spec), labels_for(spec));
    CHECK(cv.chi_sq == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(cv.v == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    // Independence: O = [[2,2],[2,2]].
    const std::vector<std::pair<int, int>> spec = {{2, 4}, {2, 4}};
    const CramersV cv = cramers_v(proportion_bags(spec), labels_for(spec));
    CHECK(cv.chi_sq == 0.0);
    CHECK(cv.v == 0.0);
  }
  {
    // Hand-derived: O = [[3,1],[1,3]] -> E all 2, chi^2 = 2, V = 0.5.
    const std::vector<std::pair<int, int>> spec = {{3, 4}, {1, 4}};
    const CramersV cv = cramers_v(proportion_bags(spec), labels_for(spec));
    CHECK(cv.chi_sq == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(cv.v == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    // Degenerate: one class absent -> V defined as 0.
    const std::vector<std::pair<int, int>> spec = {{0, 2}, {0, 2}};
    const CramersV cv = cramers_v(proportion_bags(spec), labels_for(spec));
    CHECK(cv.v == 0.0);
  }
}

TEST_CASE("skewed_large_bag_fraction") {
  // One all-zero bag of size 11 (over high = 10) holding 10% of 110 instances.
  std::vector<std::pair<int, int>> spec = {{0, 11}};
  for (int i = 0; i < 11; ++i) spec.push_back({4, 9});
  const auto coll = proportion_bags(spec);
  InstanceTable t;
  t.m = coll.table_m;
  CHECK(skewed_large_bag_fraction(t, coll, 10, 0.1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(skewed_large_bag_fraction(t, coll, 1000, 0.1) == 0.0);
  CHECK_THROWS_AS(skewed_large_bag_fraction(t, coll, 10, 0.7), ValidationError);
}

TEST_CASE("hardness report assembles and round-trips through csv") {
  Rng rng(61);
  const InstanceTable t = test::random_table(rng, 80, 2, 3, 1);
  const BagCollection coll = group_by_key(t, GroupingKey{{0, 1}});
  const FeatureSpace space = FeatureSpace::multihot(t);
  const HardnessReport r = compute_hardness_report(t, coll, space, "demo");
  CHECK(r.num_bags == coll.num_bags());
  CHECK(r.mean_bag_size ==
        doctest::Approx(static_cast<double>(r.num_instances) / static_cast<double>(r.num_bags)));
  std::int64_t prev = 0;
  for (int level : {50, 70, 85, 95}) {
    CHECK(r.percentile_sizes.at(level) >= prev);
    prev = r.percentile_sizes.at(level);
  }
  const HardnessReport rt = hardness_report_from_csv_row(hardness_report_csv_row(r));
  CHECK(rt.dataset_id == "demo");
  CHECK(rt.num_bags == r.num_bags);
  CHECK(rt.label_prop_stdev == doctest::Approx(r.label_prop_stdev).epsilon(1e-12));
  CHECK(rt.sep.ratio == doctest::Approx(r.sep.ratio).epsilon(1e-12));
  CHECK(hardness_report_json(r).contains("percentile_sizes"));
}

}  // TEST_SUITE
