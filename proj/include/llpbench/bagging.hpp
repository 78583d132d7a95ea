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
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llpbench/common.hpp"
#include "llpbench/table.hpp"

namespace llpbench {

// Ordered subset of categorical columns, 1..3 of them, used as the grouping
// key for feature bags.
struct GroupingKey {
  std::vector<int> columns;

  void validate(const InstanceTable& t) const {
    if (columns.empty() || columns.size() > 3) {
      throw ValidationError("grouping key must have 1..3 columns");
    }
    std::vector<int> sorted = columns;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("grouping key columns must be distinct");
    }
    for (int c : columns) {
      if (c < 0 || c >= t.n_cat) {
        throw ValidationError("grouping key column out of range: " + std::to_string(c));
      }
    }
  }

  std::string to_string(const InstanceTable& t) const {
    std::string s;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) s += ',';
      s += t.cat_names[static_cast<std::size_t>(columns[i])];
    }
    return s;
  }
};

// A bag stores its members strictly increasing; label_sum is accumulated in
// that member order so that recomputation reproduces it bitwise.
struct Bag {
  std::vector<std::int64_t> members;
  double label_sum = 0.0;

  std::int64_t size() const { return static_cast<std::int64_t>(members.size()); }
  double proportion() const { return label_sum / static_cast<double>(members.size()); }
};

inline double recompute_label_sum(const Bag& bag, const InstanceTable& t) {
  double s = 0.0;
  for (std::int64_t i : bag.members) s += t.labels[static_cast<std::size_t>(i)];
  return s;
}

struct Provenance {
  enum class Type { Feature, Random, FixedFeature };
  Type type = Type::Feature;
  GroupingKey key;        // Feature / FixedFeature
  std::int64_t q = 0;     // Random / FixedFeature
  std::uint64_t seed = 0;  // Random / FixedFeature
};

struct FilterRecord {
  std::int64_t low = 0;
  std::int64_t high = 0;
};

struct BagCollection {
  std::vector<Bag> bags;
  Provenance provenance;
  std::optional<FilterRecord> filter;
  std::int64_t table_m = 0;
  std::string table_fingerprint;

  std::int64_t num_bags() const { return static_cast<std::int64_t>(bags.size()); }
  std::int64_t num_instances() const {
    std::int64_t n = 0;
    for (const auto& b : bags) n += b.size();
    return n;
  }
};

namespace detail {

inline Bag make_bag(std::vector<std::int64_t> members, const InstanceTable& t) {
  Bag b;
  std::sort(members.begin(), members.end());
  b.members = std::move(members);
  b.label_sum = recompute_label_sum(b, t);
  return b;
}

inline std::vector<std::int32_t> key_tuple(const InstanceTable& t, const GroupingKey& key,
                                           std::int64_t row) {
  std::vector<std::int32_t> tup;
  tup.reserve(key.columns.size());
  for (int c : key.columns) tup.push_back(t.cat_at(row, c));
  return tup;
}

// Groups ordered lexicographically by key tuple; members in ascending row
// order within each group.
inline std::map<std::vector<std::int32_t>, std::vector<std::int64_t>> groups_by_key(
    const InstanceTable& t, const GroupingKey& key, const std::vector<std::int64_t>& rows) {
  std::map<std::vector<std::int32_t>, std::vector<std::int64_t>> groups;
  for (std::int64_t r : rows) groups[key_tuple(t, key, r)].push_back(r);
  return groups;
}

inline std::vector<std::int64_t> all_rows(const InstanceTable& t) {
  std::vector<std::int64_t> rows(static_cast<std::size_t>(t.m));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

inline std::vector<Bag> segment_into_bags(const std::vector<std::int64_t>& ordering,
                                          std::int64_t q, const InstanceTable& t) {
  const std::int64_t n_bags = static_cast<std::int64_t>(ordering.size()) / q;
  std::vector<Bag> bags;
  bags.reserve(static_cast<std::size_t>(n_bags));
  for (std::int64_t k = 0; k < n_bags; ++k) {
    std::vector<std::int64_t> members(ordering.begin() + k * q, ordering.begin() + (k + 1) * q);
    bags.push_back(make_bag(std::move(members), t));
  }
  return bags;
}

inline std::vector<Bag> feature_bags_of(const InstanceTable& t, const GroupingKey& key,
                                        const std::vector<std::int64_t>& rows) {
  std::vector<Bag> bags;
  for (auto& [tup, members] : groups_by_key(t, key, rows)) {
    bags.push_back(make_bag(members, t));
  }
  return bags;
}

inline std::vector<Bag> random_bags_of(const InstanceTable& t, std::vector<std::int64_t> rows,
                                       std::int64_t q, std::uint64_t seed) {
  if (q < 1) throw ValidationError("bag size q must be >= 1");
  if (q > static_cast<std::int64_t>(rows.size())) {
    throw ValidationError("bag size q exceeds instance count");
  }
  Rng rng(seed);
  rng.shuffle(rows);
  return segment_into_bags(rows, q, t);
}

// Seeded ordering in which equal-key instances stay contiguous: the group
// order is shuffled, then each group's members are shuffled in place.
inline std::vector<Bag> fixed_feature_bags_of(const InstanceTable& t, const GroupingKey& key,
                                              const std::vector<std::int64_t>& rows,
                                              std::int64_t q, std::uint64_t seed) {
  if (q < 1) throw ValidationError("bag size q must be >= 1");
  if (q > static_cast<std::int64_t>(rows.size())) {
    throw ValidationError("bag size q exceeds instance count");
  }
  auto groups = groups_by_key(t, key, rows);
  std::vector<std::vector<std::int64_t>> group_list;
  group_list.reserve(groups.size());
  for (auto& [tup, members] : groups) group_list.push_back(std::move(members));

  Rng rng(seed);
  rng.shuffle(group_list);
  std::vector<std::int64_t> ordering;
  ordering.reserve(rows.size());
  for (auto& g : group_list) {
    rng.shuffle(g);
    ordering.insert(ordering.end(), g.begin(), g.end());
  }
  return segment_into_bags(ordering, q, t);
}

}  // namespace detail

// One bag per distinct key tuple, covering every instance; bags ordered by
// key tuple lexicographically.
inline BagCollection group_by_key(const InstanceTable& t, const GroupingKey& key) {
  key.validate(t);
  BagCollection coll;
  coll.bags = detail::feature_bags_of(t, key, detail::all_rows(t));
  coll.provenance.type = Provenance::Type::Feature;
  coll.provenance.key = key;
  coll.table_m = t.m;
  coll.table_fingerprint = table_fingerprint(t);
  return coll;
}

// Seeded permutation cut into consecutive q-runs; floor(m/q) bags, remainder
// dropped.
inline BagCollection random_fixed_bags(const InstanceTable& t, std::int64_t q,
                                       std::uint64_t seed) {
  BagCollection coll;
  coll.bags = detail::random_bags_of(t, detail::all_rows(t), q, seed);
  coll.provenance.type = Provenance::Type::Random;
  coll.provenance.q = q;
  coll.provenance.seed = seed;
  coll.table_m = t.m;
  coll.table_fingerprint = table_fingerprint(t);
  return coll;
}

inline BagCollection fixed_size_feature_bags(const InstanceTable& t, const GroupingKey& key,
                                             std::int64_t q, std::uint64_t seed) {
  key.validate(t);
  BagCollection coll;
  coll.bags = detail::fixed_feature_bags_of(t, key, detail::all_rows(t), q, seed);
  coll.provenance.type = Provenance::Type::FixedFeature;
  coll.provenance.key = key;
  coll.provenance.q = q;
  coll.provenance.seed = seed;
  coll.table_m = t.m;
  coll.table_fingerprint = table_fingerprint(t);
  return coll;
}

// Bags with size in [low, high] survive; the thresholds are inclusive (they
// name the smallest/largest bag that can be present).
inline BagCollection filter_bags(const BagCollection& coll, std::int64_t low, std::int64_t high) {
  if (low > high) throw ValidationError("filter: low threshold exceeds high threshold");
  BagCollection out;
  out.provenance = coll.provenance;
  out.table_m = coll.table_m;
  out.table_fingerprint = coll.table_fingerprint;
  out.filter = FilterRecord{low, high};
  for (const auto& b : coll.bags) {
    if (b.size() >= low && b.size() <= high) out.bags.push_back(b);
  }
  return out;
}

inline double retained_instance_fraction(const BagCollection& coll, const InstanceTable& t) {
  if (t.m == 0) return 0.0;
  return static_cast<double>(coll.num_instances()) / static_cast<double>(t.m);
}

// All keys of size 1..max_size, ordered by size then lexicographically.
inline std::vector<GroupingKey> enumerate_candidate_keys(int n_cat, int max_size) {
  if (n_cat < 1) throw ValidationError("need at least one categorical column");
  if (max_size < 1 || max_size > 3) throw ValidationError("max key size must be 1..3");
  std::vector<GroupingKey> keys;
  for (int a = 0; a < n_cat; ++a) keys.push_back({{a}});
  if (max_size >= 2) {
    for (int a = 0; a < n_cat; ++a) {
      for (int b = a + 1; b < n_cat; ++b) keys.push_back({{a, b}});
    }
  }
  if (max_size >= 3) {
    for (int a = 0; a < n_cat; ++a) {
      for (int b = a + 1; b < n_cat; ++b) {
        for (int c = b + 1; c < n_cat; ++c) keys.push_back({{a, b, c}});
      }
    }
  }
  return keys;
}

// ---------------------------------------------------------------------------
// Bag file: JSON-lines. First record is the header (provenance, filter, m,
// table fingerprint); then one record per bag.

inline nlohmann::ordered_json provenance_json(const Provenance& p) {
  nlohmann::ordered_json j;
  switch (p.type) {
    case Provenance::Type::Feature:
      j["type"] = "feature";
      j["key"] = p.key.columns;
      break;
    case Provenance::Type::Random:
      j["type"] = "random";
      j["q"] = p.q;
      j["seed"] = p.seed;
      break;
    case Provenance::Type::FixedFeature:
      j["type"] = "fixed_feature";
      j["key"] = p.key.columns;
      j["q"] = p.q;
      j["seed"] = p.seed;
      break;
  }
  return j;
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  const std::string type = j.at("type").get<std::string>();
  if (type == "feature") {
    p.type = Provenance::Type::Feature;
    p.key.columns = j.at("key").get<std::vector<int>>();
  } else if (type == "random") {
    p.type = Provenance::Type::Random;
    p.q = j.at("q").get<std::int64_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
  } else if (type == "fixed_feature") {
    p.type = Provenance::Type::FixedFeature;
    p.key.columns = j.at("key").get<std::vector<int>>();
    p.q = j.at("q").get<std::int64_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
  } else {
    throw ValidationError("unknown provenance type: " + type);
  }
  return p;
}

inline std::string bag_file_bytes(const BagCollection& coll, const std::string& config_hash = "") {
  std::string out;
  nlohmann::ordered_json header;
  header["provenance"] = provenance_json(coll.provenance);
  if (coll.filter.has_value()) {
    header["filter"] = {{"low", coll.filter->low}, {"high", coll.filter->high}};
  } else {
    header["filter"] = nullptr;
  }
  header["m"] = coll.table_m;
  header["table_fingerprint"] = coll.table_fingerprint;
  if (!config_hash.empty()) header["config_hash"] = config_hash;
  out += header.dump();
  out += '\n';
  for (std::size_t k = 0; k < coll.bags.size(); ++k) {
    nlohmann::ordered_json rec;
    rec["id"] = k;
    rec["members"] = coll.bags[k].members;
    rec["label_sum"] = coll.bags[k].label_sum;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline void write_bag_file(const std::filesystem::path& path, const BagCollection& coll,
                           const std::string& config_hash = "") {
  write_file_atomic(path, bag_file_bytes(coll, config_hash));
}

inline BagCollection read_bag_file(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  BagCollection coll;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) eol = bytes.size();
    const std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (!have_header) {
      coll.provenance = provenance_from_json(j.at("provenance"));
      if (!j.at("filter").is_null()) {
        coll.filter = FilterRecord{j["filter"].at("low").get<std::int64_t>(),
                                   j["filter"].at("high").get<std::int64_t>()};
      }
      coll.table_m = j.at("m").get<std::int64_t>();
      coll.table_fingerprint = j.at("table_fingerprint").get<std::string>();
      have_header = true;
    } else {
      Bag b;
      b.members = j.at("members").get<std::vector<std::int64_t>>();
      b.label_sum = j.at("label_sum").get<double>();
      coll.bags.push_back(std::move(b));
    }
  }
  if (!have_header) throw ValidationError("bag file has no header record: " + path.string());
  return coll;
}

}  // namespace llpbench
