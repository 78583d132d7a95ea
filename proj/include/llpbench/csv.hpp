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

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "llpbench/common.hpp"

namespace llpbench {

enum class ColumnKind { Numerical, Categorical, Label };

enum class Mode { Ctr, Sscl };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numerical;
  int position = 0;
};

inline std::string column_kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::Numerical: return "numerical";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Label: return "label";
  }
  return "?";
}

inline ColumnKind parse_column_kind(const std::string& s) {
  if (s == "numerical") return ColumnKind::Numerical;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "label") return ColumnKind::Label;
  throw ValidationError("unknown column kind: " + s);
}

inline std::string mode_name(Mode m) { return m == Mode::Ctr ? "ctr" : "sscl"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "ctr") return Mode::Ctr;
  if (s == "sscl") return Mode::Sscl;
  throw ValidationError("unknown mode: " + s);
}

// Exactly one label column; positions must be unique (they default to the
// schema order when loaded from the JSON sidecar).
inline void validate_schema(const std::vector<ColumnSpec>& schema) {
  int labels = 0;
  std::vector<bool> seen(schema.size(), false);
  for (const auto& c : schema) {
    if (c.kind == ColumnKind::Label) ++labels;
    if (c.position < 0 || static_cast<std::size_t>(c.position) >= schema.size() ||
        seen[static_cast<std::size_t>(c.position)]) {
      throw ValidationError("schema positions must be unique and in range");
    }
    seen[static_cast<std::size_t>(c.position)] = true;
  }
  if (labels != 1) throw ValidationError("schema must declare exactly one label column");
}

// Raw rows with missing cells preserved as absent. Cells are kept exactly as
// read; an empty field is a missing value.
struct RawTable {
  std::vector<ColumnSpec> schema;
  std::vector<std::vector<std::optional<std::string>>> rows;
};

struct CsvOptions {
  bool header = false;
  char sep = ',';
};

inline std::vector<std::optional<std::string>> split_csv_line(const std::string& line, char sep) {
  std::vector<std::optional<std::string>> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    std::string cell = line.substr(start, pos == std::string::npos ? pos : pos - start);
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    if (cell.empty()) {
      cells.emplace_back(std::nullopt);
    } else {
      cells.emplace_back(std::move(cell));
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline RawTable load_csv(const std::filesystem::path& path, std::vector<ColumnSpec> schema,
                         const CsvOptions& opts = {}) {
  validate_schema(schema);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());

  RawTable table;
  table.schema = std::move(schema);
  std::string line;
  std::size_t row_index = 0;
  bool skip_header = opts.header;
  while (std::getline(in, line)) {
    if (skip_header) {
      skip_header = false;
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line, opts.sep);
    if (cells.size() != table.schema.size()) {
      throw ValidationError("row " + std::to_string(row_index) + ": expected " +
                            std::to_string(table.schema.size()) + " cells, got " +
                            std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    ++row_index;
  }
  return table;
}

}  // namespace llpbench
