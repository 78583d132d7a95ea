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

#include "llpbench/csv.hpp"
#include "llpbench/table.hpp"
#include "testutil.hpp"

using namespace llpbench;

namespace {

std::vector<ColumnSpec> ctr_schema() {
  return {{"N1", ColumnKind::Numerical, 0},
          {"C1", ColumnKind::Categorical, 1},
          {"label", ColumnKind::Label, 2}};
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("load_csv passes rows through and keeps missing cells") {
  const auto dir = test::tmp_dir("csv");
  const auto path = test::write_tmp(dir, "t.csv", "1,a,0\n2,b,1\n");
  const RawTable raw = load_csv(path, ctr_schema());
  REQUIRE(raw.rows.size() == 2);
  CHECK(*raw.rows[0][1] == "a");

  const auto path2 = test::write_tmp(dir, "t2.csv", "1,,0\n");
  const RawTable raw2 = load_csv(path2, ctr_schema());
  CHECK_FALSE(raw2.rows[0][1].has_value());
}

TEST_CASE("load_csv reports the offending row on arity violations") {
  const auto dir = test::tmp_dir("csv");
  const auto path = test::write_tmp(dir, "bad.csv", "1,a,0\n2,b\n");
  CHECK_THROWS_WITH_AS(load_csv(path, ctr_schema()), doctest::Contains("row 1"), ValidationError);
  CHECK_THROWS_AS(load_csv(dir / "absent.csv", ctr_schema()), IoError);
}

TEST_CASE("load_csv header flag and tab separator") {
  const auto dir = test::tmp_dir("csv");
  const auto path = test::write_tmp(dir, "t.tsv", "N1\tC1\tlabel\n1\ta\t0\n");
  CsvOptions opts;
  opts.header = true;
  opts.sep = '\t';
  const RawTable raw = load_csv(path, ctr_schema(), opts);
  REQUIRE(raw.rows.size() == 1);
  CHECK(*raw.rows[0][0] == "1");
}

TEST_CASE("ctr transform: threshold at 2, int(ln^2 x) above it") {
  const auto dir = test::tmp_dir("ctr");
  // x = 2 stays, x = 10 -> int((ln 10)^2) = 5 (ln^2 10 = 5.3019).
  const auto path = test::write_tmp(dir, "t.csv", "2,a,0\n10,b,1\n");
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  CHECK(table.num_at(0, 0) == 2.0);
  CHECK(table.num_at(1, 0) == 5.0);
}

TEST_CASE("ctr shift: column {-1, 3} becomes {0, 2}") {
  const auto dir = test::tmp_dir("ctr");
  const auto path = test::write_tmp(dir, "t.csv", "-1,a,0\n3,b,1\n");
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  // 3 > 2 -> int((ln 3)^2) = 1, then shift by min -1.
  CHECK(table.num_at(0, 0) == 0.0);
  CHECK(table.num_at(1, 0) == 2.0);
}

TEST_CASE("ctr missing handling and label validation") {
  const auto dir = test::tmp_dir("ctr");
  const auto path = test::write_tmp(dir, "t.csv", ",a,0\n5,,1\n");
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  CHECK(table.num_at(0, 0) == 0.0);  // missing numerical counts as 0 (min of column)
  CHECK(table.vocab_sizes[0] == 2);  // "a" and the missing marker
  CHECK(table.cat_at(0, 0) != table.cat_at(1, 0));

  const auto bad = test::write_tmp(dir, "bad.csv", "1,a,2\n");
  CHECK_THROWS_AS(preprocess_ctr(load_csv(bad, ctr_schema())), ValidationError);
}

TEST_CASE("ctr post-state: non-negative integral values; shifted columns bottom out at 0") {
  const auto dir = test::tmp_dir("ctr");
  std::string csv;
  Rng rng(11);
  bool any_negative = false;
  for (int r = 0; r < 200; ++r) {
    const int v = static_cast<int>(rng.below(2000)) - 50;
    any_negative = any_negative || v < 0;  // negatives pass the transform untouched
    csv += std::to_string(v) + ",k" + std::to_string(rng.below(5)) + "," +
           std::to_string(rng.below(2)) + "\n";
  }
  REQUIRE(any_negative);
  const auto path = test::write_tmp(dir, "t.csv", csv);
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  double mn = 1e300;
  for (std::int64_t r = 0; r < table.m; ++r) {
    const double x = table.num_at(r, 0);
    CHECK(x == std::floor(x));
    CHECK(x >= 0.0);
    mn = std::min(mn, x);
  }
  CHECK(mn == 0.0);
}

TEST_CASE("sscl drops missing-label rows and merges infrequent values") {
  const auto dir = test::tmp_dir("sscl");
  std::vector<ColumnSpec> schema = {{"N1", ColumnKind::Numerical, 0},
                                    {"C1", ColumnKind::Categorical, 1},
                                    {"target", ColumnKind::Label, 2}};
  // 13 rows, 3 with a missing label. Over the retained 10: "a" has frequency
  // 6 (kept) and "z" has 4 <= 5 (merged into the reserved code).
  std::string csv;
  for (int i = 0; i < 3; ++i) csv += "1,a,\n";
  for (int i = 0; i < 6; ++i) csv += "1,a,2\n";
  for (int i = 0; i < 4; ++i) csv += "1,z,3\n";
  const auto path = test::write_tmp(dir, "t.csv", csv);
  auto [table, vocab] = preprocess_sscl(load_csv(path, schema));
  CHECK(table.m == 10);
  CHECK(vocab.encode(0, "z") == vocab.reserved[0]);
  CHECK(vocab.encode(0, "a") != vocab.reserved[0]);
  CHECK(vocab.encode(0, "never-seen") == vocab.reserved[0]);
}

TEST_CASE("sscl value at exactly min_count frequency is merged") {
  const auto dir = test::tmp_dir("sscl");
  std::vector<ColumnSpec> schema = {{"C1", ColumnKind::Categorical, 0},
                                    {"target", ColumnKind::Label, 1}};
  std::string csv;
  for (int i = 0; i < 5; ++i) csv += "z,1\n";
  for (int i = 0; i < 6; ++i) csv += "w,1\n";
  const auto path = test::write_tmp(dir, "t.csv", csv);
  auto [table, vocab] = preprocess_sscl(load_csv(path, schema));
  CHECK(vocab.encode(0, "z") == vocab.reserved[0]);
  CHECK(vocab.encode(0, "w") == 0);
}

TEST_CASE("sscl mean imputation") {
  const auto dir = test::tmp_dir("sscl");
  std::vector<ColumnSpec> schema = {{"N1", ColumnKind::Numerical, 0},
                                    {"target", ColumnKind::Label, 1}};
  const auto path = test::write_tmp(dir, "t.csv", "1,0\n,0\n3,0\n");
  auto [table, vocab] = preprocess_sscl(load_csv(path, schema));
  CHECK(table.num_at(1, 0) == 2.0);
}

TEST_CASE("sscl with all labels missing is an error") {
  const auto dir = test::tmp_dir("sscl");
  std::vector<ColumnSpec> schema = {{"C1", ColumnKind::Categorical, 0},
                                    {"target", ColumnKind::Label, 1}};
  const auto path = test::write_tmp(dir, "t.csv", "a,\nb,\n");
  CHECK_THROWS_AS(preprocess_sscl(load_csv(path, schema)), ValidationError);
}

TEST_CASE("vocabulary round-trip: decode then re-encode is the identity") {
  const auto dir = test::tmp_dir("vocab");
  std::string csv;
  Rng rng(3);
  for (int r = 0; r < 150; ++r) {
    csv += std::to_string(rng.below(40)) + ",k" + std::to_string(rng.below(12)) + "," +
           std::to_string(rng.below(2)) + "\n";
  }
  const auto path = test::write_tmp(dir, "t.csv", csv);
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  for (std::int64_t r = 0; r < table.m; ++r) {
    const std::int32_t code = table.cat_at(r, 0);
    CHECK(vocab.encode(0, vocab.decode(0, code)) == code);
  }
}

TEST_CASE("determinism: same bytes give a bit-identical encoded table") {
  const auto dir = test::tmp_dir("det");
  std::string csv;
  Rng rng(5);
  for (int r = 0; r < 80; ++r) {
    csv += std::to_string(static_cast<int>(rng.below(100)) - 20) + ",v" +
           std::to_string(rng.below(7)) + "," + std::to_string(rng.below(2)) + "\n";
  }
  const auto path = test::write_tmp(dir, "t.csv", csv);
  auto [t1, v1] = preprocess_ctr(load_csv(path, ctr_schema()));
  auto [t2, v2] = preprocess_ctr(load_csv(path, ctr_schema()));
  CHECK(encoded_table_csv(t1) == encoded_table_csv(t2));
  CHECK(table_fingerprint(t1) == table_fingerprint(t2));
}

TEST_CASE("encoded table round-trips through csv + metadata") {
  const auto dir = test::tmp_dir("roundtrip");
  const auto path = test::write_tmp(dir, "t.csv", "2,a,0\n10,b,1\n7,a,0\n");
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  write_file_atomic(dir / "enc.csv", encoded_table_csv(table));
  write_file_atomic(dir / "meta.json", table_metadata_json(table, vocab).dump(2));
  auto [loaded, loaded_vocab] = read_encoded_table(dir / "enc.csv", dir / "meta.json");
  CHECK(encoded_table_csv(loaded) == encoded_table_csv(table));
  CHECK(loaded_vocab.token_of == vocab.token_of);
}

TEST_CASE("corrupt encoded tables are rejected on load") {
  const auto dir = test::tmp_dir("corrupt");
  const auto path = test::write_tmp(dir, "t.csv", "2,a,0\n10,b,1\n");
  auto [table, vocab] = preprocess_ctr(load_csv(path, ctr_schema()));
  const std::string meta = table_metadata_json(table, vocab).dump(2);
  write_file_atomic(dir / "meta.json", meta);

  // Code outside the vocabulary.
  write_file_atomic(dir / "bad_code.csv", "9,2,0\n1,5,1\n");
  CHECK_THROWS_AS(read_encoded_table(dir / "bad_code.csv", dir / "meta.json"), ValidationError);
  // Non-binary label in ctr mode.
  write_file_atomic(dir / "bad_label.csv", "0,2,0\n1,5,3\n");
  CHECK_THROWS_AS(read_encoded_table(dir / "bad_label.csv", dir / "meta.json"), ValidationError);
  // Row-count mismatch against the metadata.
  write_file_atomic(dir / "short.csv", "0,2,0\n");
  CHECK_THROWS_AS(read_encoded_table(dir / "short.csv", dir / "meta.json"), ValidationError);
}

TEST_CASE("schema sidecar parsing") {
  const auto dir = test::tmp_dir("schema");
  const auto path = test::write_tmp(dir, "s.json", R"({
    "columns": [{"name":"N1","kind":"numerical"},
                {"name":"C1","kind":"categorical"},
                {"name":"label","kind":"label"}],
    "mode": "ctr", "header": false})");
  const SchemaSidecar s = load_schema_sidecar(path);
  CHECK(s.columns.size() == 3);
  CHECK(s.mode == Mode::Ctr);
  CHECK_FALSE(s.csv.header);

  const auto two_labels = test::write_tmp(dir, "bad.json", R"({
    "columns": [{"name":"a","kind":"label"},{"name":"b","kind":"label"}],
    "mode": "ctr", "header": false})");
  CHECK_THROWS_AS(load_schema_sidecar(two_labels), ValidationError);
}

}  // TEST_SUITE
