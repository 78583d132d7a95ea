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
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "llpbench/common.hpp"
#include "llpbench/csv.hpp"

namespace llpbench {

// Per categorical column: raw string -> contiguous code. SSCL mode carries one
// reserved code per column that absorbs the missing marker and every value
// occurring at most `min_count` times. Missing cells are keyed as "".
struct Vocabulary {
  std::vector<std::unordered_map<std::string, std::int32_t>> code_of;
  std::vector<std::vector<std::string>> token_of;  // code -> first raw token
  std::vector<std::int32_t> reserved;              // -1 when absent (CTR mode)

  std::int32_t encode(std::size_t col, const std::string& token) const {
    const auto& m = code_of[col];
    auto it = m.find(token);
    if (it != m.end()) return it->second;
    if (reserved[col] >= 0) return reserved[col];
    throw ValidationError("token not in vocabulary for column " + std::to_string(col) + ": '" +
                          token + "'");
  }

  const std::string& decode(std::size_t col, std::int32_t code) const {
    return token_of[col].at(static_cast<std::size_t>(code));
  }

  std::size_t size(std::size_t col) const { return token_of[col].size(); }
};

// Fully integer-encoded dataset. Categorical codes and numerical values are
// stored row-major; exactly one label per instance.
struct InstanceTable {
  std::int64_t m = 0;
  int n_cat = 0;
  int n_num = 0;
  std::vector<std::int32_t> cat;  // m * n_cat
  std::vector<double> num;        // m * n_num
  std::vector<double> labels;     // m
  std::vector<std::int32_t> vocab_sizes;
  std::vector<std::string> cat_names;
  std::vector<std::string> num_names;
  std::string label_name;
  Mode mode = Mode::Ctr;

  bool regression() const { return mode == Mode::Sscl; }

  std::int32_t cat_at(std::int64_t row, int col) const {
    return cat[static_cast<std::size_t>(row) * static_cast<std::size_t>(n_cat) +
               static_cast<std::size_t>(col)];
  }
  double num_at(std::int64_t row, int col) const {
    return num[static_cast<std::size_t>(row) * static_cast<std::size_t>(n_num) +
               static_cast<std::size_t>(col)];
  }
};

namespace detail {

inline const std::string kMissingToken = "";

struct SplitColumns {
  std::vector<int> cat_pos;
  std::vector<int> num_pos;
  int label_pos = -1;
};

inline SplitColumns split_columns(const std::vector<ColumnSpec>& schema) {
  SplitColumns s;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    switch (schema[i].kind) {
      case ColumnKind::Categorical: s.cat_pos.push_back(static_cast<int>(i)); break;
      case ColumnKind::Numerical: s.num_pos.push_back(static_cast<int>(i)); break;
      case ColumnKind::Label: s.label_pos = static_cast<int>(i); break;
    }
  }
  return s;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("");
    return v;
  } catch (...) {
    throw ValidationError("cannot parse " + what + " value: '" + s + "'");
  }
}

}  // namespace detail

// CTR preprocessing: numerical x > 2 becomes int(log^2 x) (natural log by
// default, configurable base), then each numerical column is shifted by its
// minimum so values are non-negative integers. Missing numericals count as 0
// before the shift; missing categoricals get their own code. Labels must be
// 0/1.
inline std::pair<InstanceTable, Vocabulary> preprocess_ctr(const RawTable& raw,
                                                           double log_base = 0.0) {
  validate_schema(raw.schema);
  const auto cols = detail::split_columns(raw.schema);
  const double base_ln = log_base > 0.0 ? std::log(log_base) : 1.0;

  InstanceTable t;
  t.mode = Mode::Ctr;
  t.m = static_cast<std::int64_t>(raw.rows.size());
  t.n_cat = static_cast<int>(cols.cat_pos.size());
  t.n_num = static_cast<int>(cols.num_pos.size());
  for (int p : cols.cat_pos) t.cat_names.push_back(raw.schema[static_cast<std::size_t>(p)].name);
  for (int p : cols.num_pos) t.num_names.push_back(raw.schema[static_cast<std::size_t>(p)].name);
  t.label_name = raw.schema[static_cast<std::size_t>(cols.label_pos)].name;

  Vocabulary vocab;
  vocab.code_of.resize(cols.cat_pos.size());
  vocab.token_of.resize(cols.cat_pos.size());
  vocab.reserved.assign(cols.cat_pos.size(), -1);

  t.cat.reserve(static_cast<std::size_t>(t.m) * static_cast<std::size_t>(t.n_cat));
  t.num.reserve(static_cast<std::size_t>(t.m) * static_cast<std::size_t>(t.n_num));
  t.labels.reserve(static_cast<std::size_t>(t.m));

  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const auto& label_cell = row[static_cast<std::size_t>(cols.label_pos)];
    if (!label_cell.has_value()) {
      throw ValidationError("row " + std::to_string(r) + ": missing label");
    }
    const std::string& ls = *label_cell;
    if (ls != "0" && ls != "1") {
      throw ValidationError("row " + std::to_string(r) + ": CTR label must be 0 or 1, got '" +
                            ls + "'");
    }
    t.labels.push_back(ls == "1" ? 1.0 : 0.0);

    for (std::size_t c = 0; c < cols.cat_pos.size(); ++c) {
      const auto& cell = row[static_cast<std::size_t>(cols.cat_pos[c])];
      const std::string& token = cell.has_value() ? *cell : detail::kMissingToken;
      auto [it, inserted] =
          vocab.code_of[c].try_emplace(token, static_cast<std::int32_t>(vocab.token_of[c].size()));
      if (inserted) vocab.token_of[c].push_back(token);
      t.cat.push_back(it->second);
    }

    for (std::size_t c = 0; c < cols.num_pos.size(); ++c) {
      const auto& cell = row[static_cast<std::size_t>(cols.num_pos[c])];
      double x = cell.has_value()
                     ? detail::parse_double(*cell, "numerical column '" +
                                                       t.num_names[c] + "' row " + std::to_string(r))
                     : 0.0;
      if (x > 2.0) {
        const double lg = std::log(x) / base_ln;
        x = std::trunc(lg * lg);
      }
      t.num.push_back(x);
    }
  }

  // Per-column additive shift by the minimum, applied only when needed to
  // make the column non-negative; a shifted column ends with min exactly 0.
  for (int c = 0; c < t.n_num; ++c) {
    double mn = std::numeric_limits<double>::infinity();
    for (std::int64_t r = 0; r < t.m; ++r) mn = std::min(mn, t.num_at(r, c));
    if (t.m > 0 && mn < 0.0) {
      for (std::int64_t r = 0; r < t.m; ++r) {
        t.num[static_cast<std::size_t>(r) * static_cast<std::size_t>(t.n_num) +
              static_cast<std::size_t>(c)] -= mn;
      }
    }
  }

  for (const auto& toks : vocab.token_of) {
    t.vocab_sizes.push_back(static_cast<std::int32_t>(toks.size()));
  }
  return {std::move(t), std::move(vocab)};
}

// SSCL preprocessing: drop rows with a missing label; merge per-column values
// occurring at most `min_count` times (counted over the retained rows) plus
// the missing marker into one reserved code; impute missing numericals with
// the column mean over non-missing retained cells. No log transform.
inline std::pair<InstanceTable, Vocabulary> preprocess_sscl(const RawTable& raw,
                                                            int min_count = 5) {
  validate_schema(raw.schema);
  const auto cols = detail::split_columns(raw.schema);

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    if (raw.rows[r][static_cast<std::size_t>(cols.label_pos)].has_value()) kept.push_back(r);
  }
  if (kept.empty()) throw ValidationError("all labels missing: empty table after label filter");

  InstanceTable t;
  t.mode = Mode::Sscl;
  t.m = static_cast<std::int64_t>(kept.size());
  t.n_cat = static_cast<int>(cols.cat_pos.size());
  t.n_num = static_cast<int>(cols.num_pos.size());
  for (int p : cols.cat_pos) t.cat_names.push_back(raw.schema[static_cast<std::size_t>(p)].name);
  for (int p : cols.num_pos) t.num_names.push_back(raw.schema[static_cast<std::size_t>(p)].name);
  t.label_name = raw.schema[static_cast<std::size_t>(cols.label_pos)].name;

  // Frequencies over the retained rows only.
  std::vector<std::unordered_map<std::string, std::int64_t>> freq(cols.cat_pos.size());
  for (std::size_t r : kept) {
    for (std::size_t c = 0; c < cols.cat_pos.size(); ++c) {
      const auto& cell = raw.rows[r][static_cast<std::size_t>(cols.cat_pos[c])];
      if (cell.has_value()) ++freq[c][*cell];
    }
  }

  Vocabulary vocab;
  vocab.code_of.resize(cols.cat_pos.size());
  vocab.token_of.resize(cols.cat_pos.size());
  vocab.reserved.assign(cols.cat_pos.size(), -1);
  // Frequent values get codes in first-appearance order; the reserved merged
  // class takes the last code of each column.
  for (std::size_t c = 0; c < cols.cat_pos.size(); ++c) {
    for (std::size_t r : kept) {
      const auto& cell = raw.rows[r][static_cast<std::size_t>(cols.cat_pos[c])];
      if (!cell.has_value()) continue;
      if (freq[c][*cell] <= min_count) continue;
      auto [it, inserted] =
          vocab.code_of[c].try_emplace(*cell, static_cast<std::int32_t>(vocab.token_of[c].size()));
      if (inserted) vocab.token_of[c].push_back(*cell);
    }
    vocab.reserved[c] = static_cast<std::int32_t>(vocab.token_of[c].size());
    vocab.token_of[c].push_back(detail::kMissingToken);
    vocab.code_of[c].emplace(detail::kMissingToken, vocab.reserved[c]);
  }

  // Column means over non-missing retained cells.
  std::vector<double> mean(cols.num_pos.size(), 0.0);
  std::vector<std::int64_t> cnt(cols.num_pos.size(), 0);
  for (std::size_t r : kept) {
    for (std::size_t c = 0; c < cols.num_pos.size(); ++c) {
      const auto& cell = raw.rows[r][static_cast<std::size_t>(cols.num_pos[c])];
      if (cell.has_value()) {
        mean[c] += detail::parse_double(*cell, "numerical column '" + t.num_names[c] + "'");
        ++cnt[c];
      }
    }
  }
  for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = cnt[c] > 0 ? mean[c] / cnt[c] : 0.0;

  for (std::size_t r : kept) {
    const auto& row = raw.rows[r];
    const double label = detail::parse_double(*row[static_cast<std::size_t>(cols.label_pos)],
                                              "label row " + std::to_string(r));
    if (label < 0.0) {
      throw ValidationError("row " + std::to_string(r) + ": SSCL label must be non-negative");
    }
    t.labels.push_back(label);
    for (std::size_t c = 0; c < cols.cat_pos.size(); ++c) {
      const auto& cell = row[static_cast<std::size_t>(cols.cat_pos[c])];
      t.cat.push_back(vocab.encode(c, cell.has_value() ? *cell : detail::kMissingToken));
    }
    for (std::size_t c = 0; c < cols.num_pos.size(); ++c) {
      const auto& cell = row[static_cast<std::size_t>(cols.num_pos[c])];
      t.num.push_back(cell.has_value()
                          ? detail::parse_double(*cell, "numerical column '" + t.num_names[c] + "'")
                          : mean[c]);
    }
  }

  for (const auto& toks : vocab.token_of) {
    t.vocab_sizes.push_back(static_cast<std::int32_t>(toks.size()));
  }
  return {std::move(t), std::move(vocab)};
}

// ---------------------------------------------------------------------------
// Encoded-table serialization: CSV of codes/values/label plus a JSON metadata
// sidecar. Both are byte-stable for a fixed input.

inline std::string encoded_table_csv(const InstanceTable& t) {
  std::string out;
  for (std::int64_t r = 0; r < t.m; ++r) {
    for (int c = 0; c < t.n_cat; ++c) {
      out += std::to_string(t.cat_at(r, c));
      out += ',';
    }
    for (int c = 0; c < t.n_num; ++c) {
      out += format_number(t.num_at(r, c));
      out += ',';
    }
    out += format_number(t.labels[static_cast<std::size_t>(r)]);
    out += '\n';
  }
  return out;
}

// Provenance fingerprint of a table: FNV-1a over its canonical CSV bytes.
inline std::string table_fingerprint(const InstanceTable& t) {
  return to_hex(fnv1a64(encoded_table_csv(t)));
}

inline nlohmann::ordered_json table_metadata_json(const InstanceTable& t, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["format"] = "llpbench-table-v1";
  j["mode"] = mode_name(t.mode);
  j["m"] = t.m;
  j["n_cat"] = t.n_cat;
  j["n_num"] = t.n_num;
  j["cat_names"] = t.cat_names;
  j["num_names"] = t.num_names;
  j["label_name"] = t.label_name;
  j["vocab_sizes"] = t.vocab_sizes;
  nlohmann::ordered_json vocabs = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < vocab.token_of.size(); ++c) {
    nlohmann::ordered_json col;
    col["tokens"] = vocab.token_of[c];
    col["reserved"] = vocab.reserved[c];
    vocabs.push_back(std::move(col));
  }
  j["vocabs"] = std::move(vocabs);
  j["table_fingerprint"] = table_fingerprint(t);
  return j;
}

inline std::pair<InstanceTable, Vocabulary> read_encoded_table(
    const std::filesystem::path& csv_path, const std::filesystem::path& meta_path) {
  const std::string meta_bytes = read_file_bytes(meta_path);
  nlohmann::json j = nlohmann::json::parse(meta_bytes);
  InstanceTable t;
  t.mode = parse_mode(j.at("mode").get<std::string>());
  t.m = j.at("m").get<std::int64_t>();
  t.n_cat = j.at("n_cat").get<int>();
  t.n_num = j.at("n_num").get<int>();
  t.cat_names = j.at("cat_names").get<std::vector<std::string>>();
  t.num_names = j.at("num_names").get<std::vector<std::string>>();
  t.label_name = j.at("label_name").get<std::string>();
  t.vocab_sizes = j.at("vocab_sizes").get<std::vector<std::int32_t>>();

  Vocabulary vocab;
  for (const auto& col : j.at("vocabs")) {
    std::vector<std::string> toks = col.at("tokens").get<std::vector<std::string>>();
    std::unordered_map<std::string, std::int32_t> codes;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      codes.emplace(toks[i], static_cast<std::int32_t>(i));
    }
    vocab.token_of.push_back(std::move(toks));
    vocab.code_of.push_back(std::move(codes));
    vocab.reserved.push_back(col.at("reserved").get<std::int32_t>());
  }

  const std::string csv_bytes = read_file_bytes(csv_path);
  const int width = t.n_cat + t.n_num + 1;
  t.cat.reserve(static_cast<std::size_t>(t.m) * static_cast<std::size_t>(t.n_cat));
  t.num.reserve(static_cast<std::size_t>(t.m) * static_cast<std::size_t>(t.n_num));
  t.labels.reserve(static_cast<std::size_t>(t.m));
  std::size_t pos = 0;
  std::int64_t row = 0;
  while (pos < csv_bytes.size()) {
    std::size_t eol = csv_bytes.find('\n', pos);
    if (eol == std::string::npos) eol = csv_bytes.size();
    std::string line = csv_bytes.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    auto cells = split_csv_line(line, ',');
    if (static_cast<int>(cells.size()) != width) {
      throw ValidationError("encoded table row " + std::to_string(row) + ": wrong arity");
    }
    for (int c = 0; c < t.n_cat; ++c) {
      const auto code = static_cast<std::int32_t>(
          detail::parse_double(cells[static_cast<std::size_t>(c)].value_or("?"), "code"));
      if (code < 0 || code >= t.vocab_sizes[static_cast<std::size_t>(c)]) {
        throw ValidationError("encoded table row " + std::to_string(row) + ": code " +
                              std::to_string(code) + " outside vocabulary of column " +
                              t.cat_names[static_cast<std::size_t>(c)]);
      }
      t.cat.push_back(code);
    }
    for (int c = 0; c < t.n_num; ++c) {
      t.num.push_back(detail::parse_double(
          cells[static_cast<std::size_t>(t.n_cat + c)].value_or("?"), "value"));
    }
    const double label =
        detail::parse_double(cells[static_cast<std::size_t>(width - 1)].value_or("?"), "label");
    if (t.mode == Mode::Ctr ? (label != 0.0 && label != 1.0) : label < 0.0) {
      throw ValidationError("encoded table row " + std::to_string(row) +
                            ": label out of range for mode " + mode_name(t.mode));
    }
    t.labels.push_back(label);
    ++row;
  }
  if (row != t.m) {
    throw ValidationError("encoded table: metadata m=" + std::to_string(t.m) + " but " +
                          std::to_string(row) + " rows present");
  }
  return {std::move(t), std::move(vocab)};
}

// Schema sidecar: {"columns":[{"name","kind"}...], "mode":"ctr"|"sscl",
// "header":bool, optional "sep":"\t"}.
struct SchemaSidecar {
  std::vector<ColumnSpec> columns;
  Mode mode = Mode::Ctr;
  CsvOptions csv;
};

inline SchemaSidecar load_schema_sidecar(const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file_bytes(path));
  SchemaSidecar s;
  int pos = 0;
  for (const auto& col : j.at("columns")) {
    ColumnSpec spec;
    spec.name = col.at("name").get<std::string>();
    spec.kind = parse_column_kind(col.at("kind").get<std::string>());
    spec.position = pos++;
    s.columns.push_back(std::move(spec));
  }
  s.mode = parse_mode(j.at("mode").get<std::string>());
  s.csv.header = j.at("header").get<bool>();
  if (j.contains("sep")) {
    const std::string sep = j.at("sep").get<std::string>();
    if (sep.size() != 1) throw ValidationError("sep must be a single character");
    s.csv.sep = sep[0];
  }
  validate_schema(s.columns);
  return s;
}

}  // namespace llpbench
