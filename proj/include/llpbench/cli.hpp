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
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llpbench/bagging.hpp"
#include "llpbench/csv.hpp"
#include "llpbench/harness.hpp"
#include "llpbench/hardness.hpp"
#include "llpbench/kmeans.hpp"
#include "llpbench/table.hpp"

namespace llpbench::cli {

namespace fs = std::filesystem;

// Defaults shared by the whole pipeline; may be loaded from a JSON config
// document and overridden per flag.
struct PipelineConfig {
  std::vector<std::string> input_paths;
  std::string mode = "ctr";
  std::int64_t low_thresh = 50;
  std::int64_t high_thresh = 2500;
  double min_retain = 0.30;
  std::vector<std::string> keys;  // column-name lists, or the single entry "all-pairs"
  std::vector<std::int64_t> bag_sizes = {64, 128, 256, 512};
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = ".";
};

inline PipelineConfig parse_pipeline_config(const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file_bytes(path));
  PipelineConfig c;
  if (j.contains("input_paths")) c.input_paths = j["input_paths"].get<std::vector<std::string>>();
  if (j.contains("mode")) c.mode = j["mode"].get<std::string>();
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    if (t.contains("low")) c.low_thresh = t["low"].get<std::int64_t>();
    if (t.contains("high")) c.high_thresh = t["high"].get<std::int64_t>();
    if (t.contains("min_retain")) c.min_retain = t["min_retain"].get<double>();
  }
  if (j.contains("keys")) {
    if (j["keys"].is_string()) {
      c.keys = {j["keys"].get<std::string>()};
    } else {
      c.keys = j["keys"].get<std::vector<std::string>>();
    }
  }
  if (j.contains("bag_sizes")) c.bag_sizes = j["bag_sizes"].get<std::vector<std::int64_t>>();
  if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (c.low_thresh <= 0 || c.high_thresh <= 0) {
    throw ValidationError("pipeline config: thresholds must be positive");
  }
  if (!(c.min_retain > 0.0 && c.min_retain <= 1.0)) {
    throw ValidationError("pipeline config: min_retain must be in (0, 1]");
  }
  return c;
}

namespace detail {

inline std::string config_hash(const std::vector<std::string>& args) {
  std::string joined;
  for (const auto& a : args) {
    joined += a;
    joined += '\x1f';
  }
  return to_hex(fnv1a64(joined));
}

inline std::string file_fingerprint(const fs::path& path) {
  return to_hex(fnv1a64(read_file_bytes(path)));
}

inline std::uint64_t env_seed_fallback(std::uint64_t flag_seed, bool seed_given) {
  if (seed_given) return flag_seed;
  if (const char* env = std::getenv("LLPBENCH_SEED")) {
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return flag_seed;
}

// "# llpbench ..." provenance comment prepended to CSV artifacts; readers
// skip comment lines and repeated headers.
inline std::string csv_preamble(const std::string& cfg_hash,
                                const std::vector<std::string>& fingerprints) {
  std::string line = "# llpbench config_hash=" + cfg_hash;
  if (!fingerprints.empty()) {
    line += " inputs=";
    for (std::size_t i = 0; i < fingerprints.size(); ++i) {
      if (i) line += ',';
      line += fingerprints[i];
    }
  }
  line += '\n';
  return line;
}

inline std::vector<std::string> data_lines(const std::string& bytes, const std::string& header) {
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) eol = bytes.size();
    std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line == header) continue;
    rows.push_back(std::move(line));
  }
  return rows;
}

inline GroupingKey resolve_key(const InstanceTable& t, const std::string& spec) {
  GroupingKey key;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    const std::string name = spec.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!name.empty()) {
      auto it = std::find(t.cat_names.begin(), t.cat_names.end(), name);
      if (it != t.cat_names.end()) {
        key.columns.push_back(static_cast<int>(it - t.cat_names.begin()));
      } else {
        try {
          key.columns.push_back(std::stoi(name));
        } catch (...) {
          throw ValidationError("unknown categorical column: '" + name + "'");
        }
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  key.validate(t);
  return key;
}

inline std::string key_file_stem(const InstanceTable& t, const GroupingKey& key) {
  std::string s = "bags";
  for (int c : key.columns) {
    s += '_';
    s += t.cat_names[static_cast<std::size_t>(c)];
  }
  return s;
}

struct LoadedDataset {
  InstanceTable table;
  Vocabulary vocab;
  std::string table_fp;
  BagCollection bags;
  std::string bags_fp;
};

inline LoadedDataset load_table_and_bags(const fs::path& table_path, const fs::path& meta_path,
                                         const fs::path& bags_path) {
  LoadedDataset d;
  auto [table, vocab] = read_encoded_table(table_path, meta_path);
  d.table = std::move(table);
  d.vocab = std::move(vocab);
  d.table_fp = table_fingerprint(d.table);
  d.bags = read_bag_file(bags_path);
  d.bags_fp = file_fingerprint(bags_path);
  if (d.bags.table_fingerprint != d.table_fp) {
    throw ProvenanceError("bag file was built from a different table (fingerprint " +
                          d.bags.table_fingerprint + " != " + d.table_fp + ")");
  }
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand implementations. Each returns the process exit code.

inline int cmd_preprocess(const fs::path& input, const fs::path& schema_path,
                          const fs::path& out_table, const fs::path& out_meta, bool tsv,
                          double log_base, const std::string& cfg_hash) {
  SchemaSidecar sidecar = load_schema_sidecar(schema_path);
  if (tsv) sidecar.csv.sep = '\t';
  const RawTable raw = load_csv(input, sidecar.columns, sidecar.csv);
  auto [table, vocab] =
      sidecar.mode == Mode::Ctr ? preprocess_ctr(raw, log_base) : preprocess_sscl(raw);

  write_file_atomic(out_table, encoded_table_csv(table));
  nlohmann::ordered_json meta = table_metadata_json(table, vocab);
  meta["config_hash"] = cfg_hash;
  meta["source_fingerprint"] = detail::file_fingerprint(input);
  write_file_atomic(out_meta, meta.dump(2) + "\n");
  std::cout << "encoded " << table.m << " instances (" << table.n_cat << " categorical, "
            << table.n_num << " numerical)\n";
  return 0;
}

inline int cmd_bag(const fs::path& table_path, const fs::path& meta_path, const std::string& key,
                   bool all_pairs, std::int64_t random_q, std::int64_t fixed_feature_q,
                   std::uint64_t seed, const fs::path& out, const fs::path& out_dir,
                   const std::string& cfg_hash) {
  auto [table, vocab] = read_encoded_table(table_path, meta_path);
  if (all_pairs) {
    if (out_dir.empty()) throw ValidationError("--all-pairs requires --out-dir");
    fs::create_directories(out_dir);
    const auto keys = enumerate_candidate_keys(table.n_cat, 2);
    for (const auto& k : keys) {
      const BagCollection coll = group_by_key(table, k);
      write_bag_file(out_dir / (detail::key_file_stem(table, k) + ".jsonl"), coll, cfg_hash);
    }
    std::cout << "wrote " << keys.size() << " bag files\n";
    return 0;
  }
  BagCollection coll;
  if (random_q > 0) {
    coll = random_fixed_bags(table, random_q, seed);
  } else if (fixed_feature_q > 0) {
    if (key.empty()) throw ValidationError("--fixed-feature-q requires --key");
    coll = fixed_size_feature_bags(table, detail::resolve_key(table, key), fixed_feature_q, seed);
  } else if (!key.empty()) {
    coll = group_by_key(table, detail::resolve_key(table, key));
  } else {
    throw ValidationError("bag: one of --key, --random-q, --fixed-feature-q, --all-pairs required");
  }
  if (out.empty()) throw ValidationError("bag: --out required");
  write_bag_file(out, coll, cfg_hash);
  std::cout << "wrote " << coll.num_bags() << " bags covering " << coll.num_instances()
            << " instances\n";
  return 0;
}

inline int cmd_filter(const fs::path& bags_path, std::int64_t low, std::int64_t high,
                      double min_retain, double skew_eps, const fs::path& out,
                      const std::string& cfg_hash) {
  const BagCollection coll = read_bag_file(bags_path);
  const BagCollection filtered = filter_bags(coll, low, high);
  const double fraction = coll.table_m > 0 ? static_cast<double>(filtered.num_instances()) /
                                                 static_cast<double>(coll.table_m)
                                           : 0.0;
  if (skew_eps > 0.0) {
    // Diagnostic: how much of the table sits in over-threshold bags whose
    // label proportion is already near 0 or 1 (i.e. what clipping discards
    // that still carried label signal).
    InstanceTable stub;
    stub.m = coll.table_m;
    const double skew = skewed_large_bag_fraction(stub, coll, high, skew_eps);
    std::cout << "skewed large-bag instance fraction (eps=" << format_number(skew_eps)
              << "): " << format_number(skew) << "\n";
  }
  if (fraction < min_retain) {
    std::cout << "dropped: retained fraction " << format_number(fraction) << " < "
              << format_number(min_retain) << "\n";
    return 0;
  }
  write_bag_file(out, filtered, cfg_hash);
  std::cout << "kept " << filtered.num_bags() << " of " << coll.num_bags()
            << " bags, retained fraction " << format_number(fraction) << "\n";
  return 0;
}

inline int cmd_metrics(const fs::path& table_path, const fs::path& meta_path,
                       const fs::path& bags_path, const std::string& dataset_id,
                       const std::string& space_mode, const fs::path& out_json,
                       const fs::path& out_csv, const std::string& cfg_hash) {
  const auto d = detail::load_table_and_bags(table_path, meta_path, bags_path);
  const FeatureSpace space = space_mode == "raw_numeric" ? FeatureSpace::raw_numeric(d.table)
                                                         : FeatureSpace::multihot(d.table);
  const HardnessReport report = compute_hardness_report(d.table, d.bags, space, dataset_id);

  if (!out_json.empty()) {
    nlohmann::ordered_json j = hardness_report_json(report);
    j["config_hash"] = cfg_hash;
    j["table_fingerprint"] = d.table_fp;
    j["bags_fingerprint"] = d.bags_fp;
    write_file_atomic(out_json, j.dump(2) + "\n");
  }
  if (!out_csv.empty()) {
    std::string csv = detail::csv_preamble(cfg_hash, {d.table_fp, d.bags_fp});
    csv += kHardnessCsvHeader;
    csv += '\n';
    csv += hardness_report_csv_row(report);
    csv += '\n';
    write_file_atomic(out_csv, csv);
  }
  std::cout << "dataset " << dataset_id << ": " << report.num_bags << " bags, ratio "
            << format_number(report.sep.ratio) << "\n";
  return 0;
}

inline int cmd_cluster(const fs::path& metrics_csv, const std::string& axis_name, int k,
                       std::uint64_t seed, const fs::path& out, const std::string& cfg_hash) {
  const ClusterAxis axis = parse_cluster_axis(axis_name);
  const std::string bytes = read_file_bytes(metrics_csv);
  std::vector<std::string> ids;
  std::vector<HardnessReport> reports;
  for (const auto& line : detail::data_lines(bytes, kHardnessCsvHeader)) {
    HardnessReport r = hardness_report_from_csv_row(line);
    ids.push_back(r.dataset_id);
    reports.push_back(std::move(r));
  }
  if (reports.empty()) throw ValidationError("cluster: no metric rows in " + metrics_csv.string());

  ClusterAssignment assignment;
  switch (axis) {
    case ClusterAxis::TailSize: assignment = classify_tail_size(ids, reports, k, seed); break;
    case ClusterAxis::LabelVariation:
      assignment = classify_label_variation(ids, reports, k, seed);
      break;
    case ClusterAxis::BagSeparation:
      assignment = classify_bag_separation(ids, reports, k, seed);
      break;
  }

  std::string csv = detail::csv_preamble(cfg_hash, {detail::file_fingerprint(metrics_csv)});
  csv += "dataset_id,axis,cluster_name\n";
  for (const auto& id : ids) {
    csv += id + ',' + cluster_axis_name(axis) + ',' +
           assignment.names[static_cast<std::size_t>(assignment.cluster_of.at(id))] + '\n';
  }
  write_file_atomic(out, csv);
  std::cout << "clustered " << ids.size() << " datasets on " << cluster_axis_name(axis) << "\n";
  return 0;
}

inline int cmd_train(const fs::path& table_path, const fs::path& meta_path,
                     const fs::path& bags_path, const std::vector<std::string>& methods,
                     int folds, const std::string& dataset_id, TrainConfig base_cfg,
                     bool metrics_given, std::uint64_t model_seed, bool timing,
                     bool checkpoints, int jobs, const fs::path& out_dir,
                     const std::string& cfg_hash) {
  if (folds < 1 || folds > 5) throw ValidationError("--folds must be in 1..5");
  if (jobs < 1) throw ValidationError("--jobs must be positive");
  const auto d = detail::load_table_and_bags(table_path, meta_path, bags_path);
  const std::vector<SparseVec> encoded = multihot_encode_all(d.table);
  const FoldPlan plan = five_fold_split(d.table, d.bags, base_cfg.seed);
  fs::create_directories(out_dir);

  struct Task {
    std::string method_str;
    TrainConfig cfg;
    int fold;
  };
  std::vector<Task> tasks;
  for (const auto& method_str : methods) {
    TrainConfig cfg = base_cfg;
    cfg.method = parse_method(method_str);
    if (d.table.regression() && !metrics_given) {
      cfg.eval_metric = EvalMetric::Mse;
      cfg.monitor = EvalMetric::Mse;
    }
    for (int f = 0; f < folds; ++f) tasks.push_back({method_str, cfg, f});
  }

  // Fan out independent (method x fold) work items; results are written by
  // the main thread so artifact bytes do not depend on scheduling.
  std::vector<TrainRun> runs(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      const Task& task = tasks[i];
      runs[i] = train(d.table, encoded, plan.folds[static_cast<std::size_t>(task.fold)], task.cfg,
                      mix_seed(model_seed, static_cast<std::uint64_t>(task.fold)));
      runs[i].fold = task.fold;
    }
  };
  if (jobs == 1 || tasks.size() == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(tasks.size()));
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t base = 0; base < tasks.size(); base += static_cast<std::size_t>(folds)) {
    const std::string& method_str = tasks[base].method_str;
    const TrainConfig& cfg = tasks[base].cfg;
    std::vector<double> fold_metrics;
    for (int f = 0; f < folds; ++f) {
      const TrainRun& run = runs[base + static_cast<std::size_t>(f)];
      nlohmann::ordered_json j = train_run_json(run, timing);
      j["dataset_id"] = dataset_id;
      j["eval_metric"] = eval_metric_name(cfg.eval_metric);
      j["config_hash"] = cfg_hash;
      j["table_fingerprint"] = d.table_fp;
      j["bags_fingerprint"] = d.bags_fp;
      write_file_atomic(out_dir / (method_str + "_fold" + std::to_string(f) + ".json"),
                        j.dump(2) + "\n");
      if (checkpoints) {
        save_checkpoint(out_dir / (method_str + "_fold" + std::to_string(f) + ".ckpt"),
                        run.best_params, mix_seed(model_seed, static_cast<std::uint64_t>(f)),
                        run.best_epoch);
      }
      fold_metrics.push_back(run.best_metric);
      std::cout << method_str << " fold " << f << ": " << eval_metric_name(cfg.eval_metric) << " "
                << format_number(run.best_metric) << "\n";
    }
    double mean = 0.0;
    for (double v : fold_metrics) mean += v;
    mean /= static_cast<double>(fold_metrics.size());
    double var = 0.0;
    for (double v : fold_metrics) var += (v - mean) * (v - mean);
    var /= static_cast<double>(fold_metrics.size());  // population std over folds

    std::string csv = detail::csv_preamble(cfg_hash, {d.table_fp, d.bags_fp});
    csv += "dataset_id,method,eval_metric,folds,mean,std\n";
    csv += dataset_id + ',' + method_str + ',' + eval_metric_name(cfg.eval_metric) + ',' +
           std::to_string(folds) + ',' + format_number(mean) + ',' +
           format_number(std::sqrt(var)) + '\n';
    write_file_atomic(out_dir / (method_str + "_aggregate.csv"), csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Report: join hardness metrics with aggregated train runs; optional static
// SVG scatter plots of score vs datasets ordered by each hardness metric.

namespace detail {

struct RunAggregate {
  std::string dataset_id;
  std::string method;
  std::string eval_metric;
  int folds = 0;
  double mean = 0.0;
  double std_dev = 0.0;
};

inline std::string svg_scatter(const std::string& title,
                               const std::vector<std::string>& dataset_order,
                               const std::map<std::string, std::map<std::string, double>>& score,
                               const std::vector<std::string>& methods,
                               const std::string& provenance_comment) {
  const int width = 720, height = 420, margin = 50;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [ds, per_method] : score) {
    for (const auto& [m, v] : per_method) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  auto fmt2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<!-- " + provenance_comment + " -->\n";
  svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"20\" text-anchor=\"middle\">" + title +
         "</text>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + std::to_string(height - margin) +
         "\" x2=\"" + std::to_string(width - margin) + "\" y2=\"" +
         std::to_string(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + std::to_string(margin) + "\" x2=\"" +
         std::to_string(margin) + "\" y2=\"" + std::to_string(height - margin) +
         "\" stroke=\"black\"/>\n";
  const double xspan = static_cast<double>(width - 2 * margin);
  const double yspan = static_cast<double>(height - 2 * margin);
  const std::size_t n = dataset_order.size();
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const char* color = kColors[mi % 10];
    for (std::size_t di = 0; di < n; ++di) {
      auto it = score.find(dataset_order[di]);
      if (it == score.end()) continue;
      auto jt = it->second.find(methods[mi]);
      if (jt == it->second.end()) continue;
      const double x = margin + (n > 1 ? xspan * static_cast<double>(di) /
                                             static_cast<double>(n - 1)
                                       : xspan / 2.0);
      const double y = height - margin - yspan * (jt->second - lo) / (hi - lo);
      svg += "<circle cx=\"" + fmt2(x) + "\" cy=\"" + fmt2(y) + "\" r=\"3\" fill=\"" + color +
             "\"/>\n";
    }
    svg += "<text x=\"" + std::to_string(width - margin + 4) + "\" y=\"" +
           std::to_string(margin + 14 * static_cast<int>(mi)) + "\" font-size=\"10\" fill=\"" +
           color + "\">" + methods[mi] + "</text>\n";
  }
  svg += "<text x=\"12\" y=\"" + std::to_string(margin - 8) + "\" font-size=\"10\">" + fmt2(hi) +
         "</text>\n";
  svg += "<text x=\"12\" y=\"" + std::to_string(height - margin) + "\" font-size=\"10\">" +
         fmt2(lo) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace detail

inline int cmd_report(const fs::path& metrics_csv, const fs::path& runs_dir, const fs::path& out,
                      const fs::path& svg_dir, const std::string& cfg_hash) {
  const std::string metric_bytes = read_file_bytes(metrics_csv);
  std::map<std::string, HardnessReport> reports;
  std::vector<std::string> dataset_order;
  for (const auto& line : detail::data_lines(metric_bytes, kHardnessCsvHeader)) {
    HardnessReport r = hardness_report_from_csv_row(line);
    if (!reports.count(r.dataset_id)) dataset_order.push_back(r.dataset_id);
    reports.emplace(r.dataset_id, std::move(r));
  }
  if (reports.empty()) throw ValidationError("report: no metric rows");

  std::vector<fs::path> agg_files;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.path().extension() == ".csv" &&
        entry.path().filename().string().find("_aggregate") != std::string::npos) {
      agg_files.push_back(entry.path());
    }
  }
  std::sort(agg_files.begin(), agg_files.end());
  std::vector<detail::RunAggregate> rows;
  for (const auto& p : agg_files) {
    for (const auto& line :
         detail::data_lines(read_file_bytes(p), "dataset_id,method,eval_metric,folds,mean,std")) {
      auto cells = split_csv_line(line, ',');
      if (cells.size() != 6) continue;
      detail::RunAggregate a;
      a.dataset_id = cells[0].value_or("");
      a.method = cells[1].value_or("");
      a.eval_metric = cells[2].value_or("");
      a.folds = static_cast<int>(llpbench::detail::parse_double(cells[3].value_or("0"), "folds"));
      a.mean = llpbench::detail::parse_double(cells[4].value_or("nan"), "mean");
      a.std_dev = llpbench::detail::parse_double(cells[5].value_or("nan"), "std");
      rows.push_back(std::move(a));
    }
  }
  if (rows.empty()) throw ValidationError("report: no aggregate runs found in " + runs_dir.string());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dataset_id, a.method) < std::tie(b.dataset_id, b.method);
  });

  std::string csv = detail::csv_preamble(cfg_hash, {detail::file_fingerprint(metrics_csv)});
  csv += "dataset_id,mean_bag_size,label_prop_stdev,inter_intra_ratio,method,eval_metric,folds,"
         "mean,std\n";
  for (const auto& a : rows) {
    auto it = reports.find(a.dataset_id);
    const std::string mbs = it != reports.end() ? format_number(it->second.mean_bag_size) : "nan";
    const std::string lps =
        it != reports.end() ? format_number(it->second.label_prop_stdev) : "nan";
    const std::string ratio = it != reports.end() ? format_number(it->second.sep.ratio) : "nan";
    csv += a.dataset_id + ',' + mbs + ',' + lps + ',' + ratio + ',' + a.method + ',' +
           a.eval_metric + ',' + std::to_string(a.folds) + ',' + format_number(a.mean) + ',' +
           format_number(a.std_dev) + '\n';
  }
  write_file_atomic(out, csv);

  if (!svg_dir.empty()) {
    fs::create_directories(svg_dir);
    std::map<std::string, std::map<std::string, double>> score;
    std::set<std::string> method_set;
    for (const auto& a : rows) {
      score[a.dataset_id][a.method] = a.mean;
      method_set.insert(a.method);
    }
    const std::vector<std::string> methods(method_set.begin(), method_set.end());
    const std::string provenance =
        "llpbench config_hash=" + cfg_hash + " inputs=" + detail::file_fingerprint(metrics_csv);
    const std::vector<std::pair<std::string, double HardnessReport::*>> axes = {
        {"mean_bag_size", &HardnessReport::mean_bag_size},
        {"label_prop_stdev", &HardnessReport::label_prop_stdev},
    };
    for (const auto& [axis, member] : axes) {
      std::vector<std::string> order = dataset_order;
      std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return reports.at(a).*member < reports.at(b).*member;
      });
      write_file_atomic(svg_dir / ("scatter_by_" + axis + ".svg"),
                        detail::svg_scatter("score vs datasets by " + axis, order, score, methods,
                                            provenance));
    }
    {
      std::vector<std::string> order = dataset_order;
      std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return reports.at(a).sep.ratio < reports.at(b).sep.ratio;
      });
      write_file_atomic(svg_dir / "scatter_by_inter_intra_ratio.svg",
                        detail::svg_scatter("score vs datasets by inter_intra_ratio", order, score,
                                            methods, provenance));
    }
  }
  std::cout << "report: " << rows.size() << " rows over " << reports.size() << " datasets\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Argument surface.

inline int run(std::vector<std::string> args) {
  CLI::App app{"llpbench: build, measure and train on label-proportion datasets"};
  app.require_subcommand(1);
  const std::string cfg_hash = detail::config_hash(args);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "encode a raw CSV/TSV table");
  std::string pre_input, pre_schema, pre_out_table, pre_out_meta;
  bool pre_tsv = false;
  double pre_log_base = 0.0;
  pre->add_option("--input", pre_input)->required();
  pre->add_option("--schema", pre_schema)->required();
  pre->add_option("--out-table", pre_out_table)->required();
  pre->add_option("--out-meta", pre_out_meta)->required();
  pre->add_flag("--tsv", pre_tsv, "tab-separated input");
  pre->add_option("--log-base", pre_log_base,
                  "base for the log^2 transform of large values (default: natural log)");

  // bag
  auto* bag = app.add_subcommand("bag", "construct a bag collection");
  std::string bag_table, bag_meta, bag_key, bag_out, bag_out_dir, bag_config;
  bool bag_all_pairs = false;
  std::int64_t bag_random_q = 0, bag_ff_q = 0;
  std::uint64_t bag_seed = 0;
  bool bag_seed_given = false;
  bag->add_option("--table", bag_table)->required();
  bag->add_option("--meta", bag_meta)->required();
  bag->add_option("--key", bag_key, "comma-separated categorical column names");
  auto* bag_ap_flag = bag->add_flag("--all-pairs", bag_all_pairs, "all keys of size <= 2");
  auto* bag_rq_opt = bag->add_option("--random-q", bag_random_q,
                                     "random fixed-size bags of size q");
  bag->add_option("--fixed-feature-q", bag_ff_q, "fixed-size feature bags of size q")
      ->excludes(bag_rq_opt)
      ->excludes(bag_ap_flag);
  bag_rq_opt->excludes(bag_ap_flag);
  bag->add_option("--seed", bag_seed)->each([&](const std::string&) { bag_seed_given = true; });
  bag->add_option("--out", bag_out);
  bag->add_option("--out-dir", bag_out_dir);
  bag->add_option("--config", bag_config, "pipeline config JSON");

  // filter
  auto* flt = app.add_subcommand("filter", "apply bag-size and dataset filters");
  std::string flt_bags, flt_out, flt_config;
  std::int64_t flt_low = 50, flt_high = 2500;
  double flt_min_retain = 0.0;
  flt->add_option("--bags", flt_bags)->required();
  flt->add_option("--low", flt_low);
  flt->add_option("--high", flt_high);
  flt->add_option("--min-retain", flt_min_retain,
                  "drop the dataset when the retained fraction falls below this");
  double flt_skew_eps = 0.0;
  flt->add_option("--skew-eps", flt_skew_eps,
                  "also report the fraction of instances in skewed over-threshold bags");
  flt->add_option("--out", flt_out)->required();
  flt->add_option("--config", flt_config);

  // metrics
  auto* met = app.add_subcommand("metrics", "hardness report for one bag collection");
  std::string met_table, met_meta, met_bags, met_id = "dataset", met_space = "multihot";
  std::string met_out_json, met_out_csv;
  met->add_option("--table", met_table)->required();
  met->add_option("--meta", met_meta)->required();
  met->add_option("--bags", met_bags)->required();
  met->add_option("--dataset-id", met_id);
  met->add_option("--space", met_space)->check(CLI::IsMember({"multihot", "raw_numeric"}));
  met->add_option("--out-json", met_out_json);
  met->add_option("--out-csv", met_out_csv);

  // cluster
  auto* clu = app.add_subcommand("cluster", "k-Means characterization of datasets");
  std::string clu_metrics, clu_axis = "tail_size", clu_out;
  int clu_k = 4;
  std::uint64_t clu_seed = 0;
  clu->add_option("--metrics", clu_metrics)->required();
  clu->add_option("--axis", clu_axis)
      ->check(CLI::IsMember({"tail_size", "label_variation", "bag_separation"}));
  clu->add_option("--k", clu_k);
  clu->add_option("--seed", clu_seed);
  clu->add_option("--out", clu_out)->required();

  // train
  auto* trn = app.add_subcommand("train", "train baselines over the fold plan");
  std::string trn_table, trn_meta, trn_bags, trn_method, trn_out, trn_id = "dataset", trn_config;
  int trn_folds = 5;
  TrainConfig trn_cfg;
  std::uint64_t trn_model_seed = 1;
  bool trn_seed_given = false, trn_timing = false;
  std::string trn_eval, trn_monitor;
  trn->add_option("--table", trn_table)->required();
  trn->add_option("--meta", trn_meta)->required();
  trn->add_option("--bags", trn_bags)->required();
  trn->add_option("--method", trn_method, "method id; omit with --config methods list");
  trn->add_option("--folds", trn_folds);
  trn->add_option("--dataset-id", trn_id);
  trn->add_option("--seed", trn_cfg.seed)->each([&](const std::string&) { trn_seed_given = true; });
  trn->add_option("--model-seed", trn_model_seed);
  trn->add_option("--lr", trn_cfg.lr);
  trn->add_option("--bag-batch", trn_cfg.bag_batch);
  trn->add_option("--patience", trn_cfg.patience);
  trn->add_option("--max-epochs", trn_cfg.max_epochs);
  trn->add_option("--hidden1", trn_cfg.hidden1);
  trn->add_option("--hidden2", trn_cfg.hidden2);
  trn->add_option("--instance-batch", trn_cfg.instance_batch);
  trn->add_option("--eval", trn_eval)->check(CLI::IsMember({"auc", "mse", "accuracy"}));
  trn->add_option("--monitor", trn_monitor)->check(CLI::IsMember({"auc", "mse", "accuracy"}));
  trn->add_option("--simllp-lambda", trn_cfg.simllp_lambda);
  trn->add_option("--sinkhorn-eps", trn_cfg.sinkhorn_eps);
  trn->add_option("--sinkhorn-iters", trn_cfg.sinkhorn_iters);
  trn->add_flag("--timing", trn_timing, "record wall time in run artifacts (not byte-stable)");
  bool trn_checkpoints = false;
  int trn_jobs = 1;
  trn->add_flag("--checkpoints", trn_checkpoints, "write best-epoch model checkpoints");
  trn->add_option("--jobs", trn_jobs, "parallel (method x fold) work items");
  trn->add_option("--out", trn_out)->required();
  trn->add_option("--config", trn_config);

  // report
  auto* rep = app.add_subcommand("report", "join metrics with train runs");
  std::string rep_metrics, rep_runs, rep_out, rep_svg;
  rep->add_option("--metrics", rep_metrics)->required();
  rep->add_option("--runs", rep_runs)->required();
  rep->add_option("--out", rep_out)->required();
  rep->add_option("--svg", rep_svg, "directory for scatter SVGs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pre) {
      return cmd_preprocess(pre_input, pre_schema, pre_out_table, pre_out_meta, pre_tsv,
                            pre_log_base, cfg_hash);
    }
    if (*bag) {
      if (!bag_config.empty()) {
        const PipelineConfig pc = parse_pipeline_config(bag_config);
        if (!bag_seed_given && !pc.seeds.empty()) bag_seed = pc.seeds.front();
        if (bag_key.empty() && !bag_all_pairs && pc.keys.size() == 1 &&
            pc.keys.front() == "all-pairs") {
          bag_all_pairs = true;
          if (bag_out_dir.empty()) bag_out_dir = pc.output_dir;
        }
      }
      bag_seed = detail::env_seed_fallback(bag_seed, bag_seed_given);
      return cmd_bag(bag_table, bag_meta, bag_key, bag_all_pairs, bag_random_q, bag_ff_q, bag_seed,
                     bag_out, bag_out_dir, cfg_hash);
    }
    if (*flt) {
      if (!flt_config.empty()) {
        const PipelineConfig pc = parse_pipeline_config(flt_config);
        if (flt->count("--low") == 0) flt_low = pc.low_thresh;
        if (flt->count("--high") == 0) flt_high = pc.high_thresh;
        if (flt->count("--min-retain") == 0) flt_min_retain = pc.min_retain;
      }
      return cmd_filter(flt_bags, flt_low, flt_high, flt_min_retain, flt_skew_eps, flt_out,
                        cfg_hash);
    }
    if (*met) {
      return cmd_metrics(met_table, met_meta, met_bags, met_id, met_space, met_out_json,
                         met_out_csv, cfg_hash);
    }
    if (*clu) {
      return cmd_cluster(clu_metrics, clu_axis, clu_k, clu_seed, clu_out, cfg_hash);
    }
    if (*trn) {
      std::vector<std::string> methods;
      if (!trn_method.empty()) methods.push_back(trn_method);
      if (!trn_config.empty()) {
        const PipelineConfig pc = parse_pipeline_config(trn_config);
        if (methods.empty()) methods = pc.methods;
        if (!trn_seed_given && !pc.seeds.empty()) trn_cfg.seed = pc.seeds.front();
      }
      if (methods.empty()) throw ValidationError("train: --method or config methods list required");
      trn_cfg.seed = detail::env_seed_fallback(trn_cfg.seed, trn_seed_given);
      if (!trn_eval.empty()) trn_cfg.eval_metric = parse_eval_metric(trn_eval);
      if (!trn_monitor.empty()) trn_cfg.monitor = parse_eval_metric(trn_monitor);
      const bool metrics_given = !trn_eval.empty() || !trn_monitor.empty();
      return cmd_train(trn_table, trn_meta, trn_bags, methods, trn_folds, trn_id, trn_cfg,
                       metrics_given, trn_model_seed, trn_timing, trn_checkpoints, trn_jobs,
                       trn_out, cfg_hash);
    }
    if (*rep) {
      return cmd_report(rep_metrics, rep_runs, rep_out, rep_svg, cfg_hash);
    }
  } catch (const ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace llpbench::cli
