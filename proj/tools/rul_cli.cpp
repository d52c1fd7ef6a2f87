// Command-line front end: data preparation, training, multi-seed
// experiments, evaluation and activation export for the C-MAPSS RUL
// pipeline.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rul/checkpoint.hpp"
#include "rul/cmapss.hpp"
#include "rul/evaluation.hpp"
#include "rul/kernels.hpp"
#include "rul/prepared.hpp"
#include "rul/run_config.hpp"
#include "rul/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

struct ManifestWriter {
  json doc;
  fs::path dir;

  ManifestWriter(const fs::path& out_dir, const std::string& command) {
    dir = out_dir;
    fs::create_directories(dir);
    doc["command"] = command;
    doc["started_at"] = now_iso8601();
    doc["outputs"] = json::array();
  }
  void add_output(const std::string& name) { doc["outputs"].push_back(name); }
  void finish() {
    doc["finished_at"] = now_iso8601();
    add_output("manifest.json");
    write_file(dir / "manifest.json", doc.dump(2) + "\n");
  }
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) {
      comma = text.size();
    }
    const std::string token = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (token.empty()) {
      continue;
    }
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw std::runtime_error("bad seed '" + token + "' in --seeds");
    }
  }
  if (seeds.empty()) {
    throw std::runtime_error("--seeds produced no seeds");
  }
  return seeds;
}

void print_length_row(const char* name, const rul::LengthSummary& s) {
  std::printf("  %-6s %6zu %8zu %9.1f %8zu\n", name, s.count, s.min_len,
              s.mean_len, s.max_len);
}

// Loads a prepared dataset, regenerating labels when the cap is overridden.
rul::PreparedDataset load_prepared_with_cap(const fs::path& dir,
                                            std::optional<int> cap_override) {
  rul::PreparedDataset data = rul::read_prepared(dir);
  if (cap_override && *cap_override != data.cap) {
    rul::relabel(data, *cap_override);
  }
  return data;
}

json metric_json(const rul::MetricStats& m) {
  return json{{"mean", m.mean}, {"std", m.stddev}, {"values", m.values}};
}

int cmd_prepare(const std::string& dataset, const fs::path& data_root,
                int cap, const fs::path& out, const rul::SyntheticSpec& synth) {
  ManifestWriter manifest(out, "prepare");
  rul::DatasetBundle bundle;
  if (dataset == "SYNTH") {
    bundle = rul::generate_synthetic(synth);
  } else {
    bundle = rul::load_cmapss(data_root, dataset);
  }
  const rul::PreparedDataset data = rul::prepare_dataset(bundle, cap);
  rul::write_prepared(data, out);

  const auto train_summary = rul::summarize_lengths(bundle.train);
  const auto test_summary = rul::summarize_lengths(bundle.test);
  std::printf("dataset %s (cap %d)\n", dataset.c_str(), cap);
  std::printf("  %-6s %6s %8s %9s %8s\n", "split", "count", "min", "mean",
              "max");
  print_length_row("train", train_summary);
  print_length_row("test", test_summary);

  manifest.doc["dataset"] = dataset;
  manifest.doc["cap"] = cap;
  if (dataset == "SYNTH") {
    manifest.doc["seeds"] = {synth.seed};
  }
  manifest.doc["metrics"] = {
      {"train_count", train_summary.count},
      {"test_count", test_summary.count},
      {"train_len_min", train_summary.min_len},
      {"train_len_mean", train_summary.mean_len},
      {"train_len_max", train_summary.max_len},
  };
  for (const char* name : {"meta.json", "stats.json", "train_labeled.txt",
                           "test_labeled.txt", "test_rul.txt"}) {
    manifest.add_output(name);
  }
  manifest.finish();
  return 0;
}

int cmd_train(const std::optional<fs::path>& config_path,
              const fs::path& prepared, const fs::path& out,
              std::optional<std::uint64_t> seed, std::optional<int> cap,
              bool ablate) {
  rul::TrainConfig config =
      config_path ? rul::load_train_config(*config_path) : rul::TrainConfig{};
  if (seed) {
    config.seed = *seed;
  }
  if (cap) {
    config.cap = *cap;
  }
  if (ablate) {
    config.arch.ablate_feature_mlp = true;
  }
  config.validate();

  ManifestWriter manifest(out, "train");
  rul::PreparedDataset data = load_prepared_with_cap(prepared, config.cap);
  config.cap = data.cap;

  const auto [train_idx, val_idx] =
      rul::split_indices(data.train.size(), config.train_fraction, config.seed);
  std::vector<rul::LabeledTrajectory> train_set, val_set;
  for (std::size_t i : train_idx) {
    train_set.push_back(data.train[i]);
  }
  for (std::size_t i : val_idx) {
    val_set.push_back(data.train[i]);
  }

  const rul::TrainResult result = rul::train_one(config, train_set, val_set);

  const std::string digest = rul::config_digest(config);
  rul::Checkpoint checkpoint;
  checkpoint.params = result.params;
  checkpoint.normalization = data.stats;
  checkpoint.train_config_digest = digest;
  rul::save_checkpoint(checkpoint, out / "checkpoint.rulm");
  manifest.add_output("checkpoint.rulm");

  {
    std::ofstream csv(out / "history.csv", std::ios::binary);
    result.history.write_csv(csv);
    manifest.add_output("history.csv");
  }

  const rul::EvalReport report = rul::evaluate_bundle(
      result.params, data.test, data.test_rul, data.dataset, config.cap);
  write_file(out / "report.json", report.to_json() + "\n");
  manifest.add_output("report.json");

  const auto& best = result.history.epochs.at(result.history.best_epoch - 1);
  std::printf("trained %s, seed %llu: stopped after %zu epochs\n",
              data.dataset.c_str(),
              static_cast<unsigned long long>(config.seed),
              result.history.epochs.size());
  std::printf("  best epoch %zu: val RMSE %s cycles\n",
              result.history.best_epoch, fmt2(best.val_rmse).c_str());
  std::printf("  test last-cycle: RMSE %s  Score %s\n",
              fmt2(report.rmse_last_cycle).c_str(),
              fmt2(report.score_last_cycle).c_str());
  std::printf("  test per-cycle:  RMSE %s  Score %s\n",
              fmt2(report.rmse_per_cycle).c_str(),
              fmt2(report.score_per_cycle).c_str());

  manifest.doc["dataset"] = data.dataset;
  manifest.doc["config_digest"] = digest;
  manifest.doc["seeds"] = {config.seed};
  manifest.doc["metrics"] = {
      {"best_epoch", result.history.best_epoch},
      {"val_rmse", best.val_rmse},
      {"test_rmse_last_cycle", report.rmse_last_cycle},
      {"test_score_last_cycle", report.score_last_cycle},
  };
  manifest.finish();
  return 0;
}

int cmd_experiment(const std::optional<fs::path>& config_path,
                   const fs::path& prepared, const std::string& seeds_text,
                   const fs::path& out, std::size_t jobs, bool with_ablation,
                   std::optional<int> cap) {
  rul::TrainConfig base =
      config_path ? rul::load_train_config(*config_path) : rul::TrainConfig{};
  if (cap) {
    base.cap = *cap;
  }
  const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_text);

  ManifestWriter manifest(out, "experiment");
  rul::PreparedDataset data = load_prepared_with_cap(prepared, base.cap);
  base.cap = data.cap;

  struct Row {
    std::string model;
    rul::MultiRunResult result;
  };
  std::vector<Row> rows;
  {
    rul::TrainConfig cfg = base;
    cfg.arch.ablate_feature_mlp = false;
    rows.push_back({"full", rul::multi_run_labeled(cfg, data.train, data.test,
                                                   data.test_rul, seeds, jobs)});
  }
  if (with_ablation) {
    rul::TrainConfig cfg = base;
    cfg.arch.ablate_feature_mlp = true;
    rows.push_back({"no-first-mlp",
                    rul::multi_run_labeled(cfg, data.train, data.test,
                                           data.test_rul, seeds, jobs)});
  }

  json report;
  report["dataset"] = data.dataset;
  report["cap"] = data.cap;
  report["seeds"] = seeds;
  report["rows"] = json::array();
  for (const auto& row : rows) {
    report["rows"].push_back({
        {"model", row.model},
        {"rmse_last_cycle", metric_json(row.result.rmse_last_cycle)},
        {"score_last_cycle", metric_json(row.result.score_last_cycle)},
        {"rmse_per_cycle", metric_json(row.result.rmse_per_cycle)},
        {"score_per_cycle", metric_json(row.result.score_per_cycle)},
    });
  }
  write_file(out / "report.json", report.dump(2) + "\n");
  manifest.add_output("report.json");

  std::string table;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %-14s %-18s %-18s\n",
                data.dataset.c_str(), "model", "RMSE (last)", "Score (last)");
  table += line;
  for (const auto& row : rows) {
    const auto& r = row.result;
    std::snprintf(line, sizeof(line), "%-8s %-14s %8s +/- %-6s %8s +/- %-6s\n",
                  "", row.model.c_str(), fmt2(r.rmse_last_cycle.mean).c_str(),
                  fmt2(r.rmse_last_cycle.stddev).c_str(),
                  fmt2(r.score_last_cycle.mean).c_str(),
                  fmt2(r.score_last_cycle.stddev).c_str());
    table += line;
  }
  table += "\npublished reference (10 runs, last-cycle):\n";
  for (bool ablated : {false, true}) {
    for (const auto& ref : rul::reference_results(ablated)) {
      std::snprintf(line, sizeof(line), "%-8s %-14s %8s +/- %-6s %8s +/- %-6s\n",
                    ref.dataset, ablated ? "no-first-mlp" : "full",
                    fmt2(ref.rmse_mean).c_str(), fmt2(ref.rmse_std).c_str(),
                    fmt2(ref.score_mean).c_str(), fmt2(ref.score_std).c_str());
      table += line;
    }
  }
  write_file(out / "report.txt", table);
  manifest.add_output("report.txt");
  std::fputs(table.c_str(), stdout);

  manifest.doc["dataset"] = data.dataset;
  manifest.doc["config_digest"] = rul::config_digest(base);
  manifest.doc["seeds"] = seeds;
  manifest.doc["metrics"] = {
      {"rmse_last_cycle_mean", rows[0].result.rmse_last_cycle.mean},
      {"score_last_cycle_mean", rows[0].result.score_last_cycle.mean},
  };
  manifest.finish();
  return 0;
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& prepared,
             const fs::path& out, bool uncapped_targets) {
  ManifestWriter manifest(out, "eval");
  const rul::Checkpoint checkpoint = rul::load_checkpoint(checkpoint_path);
  rul::PreparedDataset data = rul::read_prepared(prepared);
  if (!(checkpoint.normalization == data.stats)) {
    throw std::runtime_error(
        "checkpoint normalization statistics do not match the prepared "
        "dataset; evaluate against the dataset the model was trained on");
  }

  const rul::EvalReport report =
      rul::evaluate_bundle(checkpoint.params, data.test, data.test_rul,
                           data.dataset, data.cap, !uncapped_targets);
  write_file(out / "report.json", report.to_json() + "\n");
  manifest.add_output("report.json");

  std::string csv = "residual\n";
  char buf[40];
  for (double d : report.residuals_last_cycle) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", d);
    csv += buf;
  }
  write_file(out / "residuals.csv", csv);
  manifest.add_output("residuals.csv");

  std::printf("%s: last-cycle RMSE %s  Score %s | per-cycle RMSE %s  Score %s\n",
              data.dataset.c_str(), fmt2(report.rmse_last_cycle).c_str(),
              fmt2(report.score_last_cycle).c_str(),
              fmt2(report.rmse_per_cycle).c_str(),
              fmt2(report.score_per_cycle).c_str());

  manifest.doc["dataset"] = data.dataset;
  manifest.doc["config_digest"] = checkpoint.train_config_digest;
  manifest.doc["metrics"] = {
      {"rmse_last_cycle", report.rmse_last_cycle},
      {"score_last_cycle", report.score_last_cycle},
      {"rmse_per_cycle", report.rmse_per_cycle},
      {"score_per_cycle", report.score_per_cycle},
  };
  manifest.finish();
  return 0;
}

int cmd_export_activations(const fs::path& checkpoint_path,
                           const fs::path& prepared, int unit_id,
                           const std::string& split, const fs::path& out) {
  ManifestWriter manifest(out, "export-activations");
  const rul::Checkpoint checkpoint = rul::load_checkpoint(checkpoint_path);
  rul::PreparedDataset data = rul::read_prepared(prepared);
  const auto& pool = split == "test" ? data.test : data.train;
  const auto it = std::find_if(pool.begin(), pool.end(),
                               [&](const rul::LabeledTrajectory& t) {
                                 return t.trajectory.unit_id == unit_id;
                               });
  if (it == pool.end()) {
    throw std::runtime_error("unit " + std::to_string(unit_id) +
                             " not found in the " + split + " split (" +
                             std::to_string(pool.size()) + " units)");
  }

  const rul::ActivationExport ex =
      rul::export_activations(checkpoint.params, it->trajectory.features);
  const auto write_csv = [&](const char* name, const rul::Matrix& m,
                             const char* prefix) {
    std::ofstream f(out / name, std::ios::binary);
    rul::write_matrix_csv(f, m, prefix);
    manifest.add_output(name);
  };
  write_csv("inputs.csv", ex.inputs, "input");
  if (!ex.features.empty()) {
    write_csv("features.csv", ex.features, "feature");
  }
  write_csv("lstm.csv", ex.lstm_outputs, "cell");
  write_csv("predictions.csv", ex.predictions, "rul");

  std::printf("unit %d (%s, %zu cycles): inputs %zux%zu", unit_id,
              split.c_str(), ex.inputs.rows(), ex.inputs.rows(),
              ex.inputs.cols());
  if (!ex.features.empty()) {
    std::printf(", features %zux%zu", ex.features.rows(), ex.features.cols());
  }
  std::printf(", lstm %zux%zu\n", ex.lstm_outputs.rows(),
              ex.lstm_outputs.cols());

  manifest.doc["dataset"] = data.dataset;
  manifest.doc["config_digest"] = checkpoint.train_config_digest;
  manifest.doc["metrics"] = {{"unit", unit_id},
                             {"cycles", ex.inputs.rows()},
                             {"split", split}};
  manifest.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C-MAPSS remaining-useful-life prognostics harness"};
  app.require_subcommand(1);

  std::string kernels_name;
  app.add_option("--kernels", kernels_name,
                 "Compute backend: auto, scalar, avx2, neon (results are "
                 "identical; this only affects speed)");

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "Parse, normalize and label a dataset");
  std::string dataset = "SYNTH";
  fs::path data_root = "data";
  int cap = 130;
  fs::path out_dir;
  rul::SyntheticSpec synth;
  synth.num_train = 100;
  synth.num_test = 100;
  prepare->add_option("--dataset", dataset,
                      "FD001..FD004 or SYNTH")->required();
  prepare->add_option("--data-root", data_root,
                      "Directory holding train_<id>.txt etc.");
  prepare->add_option("--cap", cap, "Maximum RUL for the piece-wise targets");
  prepare->add_option("--out", out_dir, "Output directory")->required();
  std::uint64_t synth_seed = 0;
  prepare->add_option("--seed", synth_seed, "Synthetic generator seed");
  prepare->add_option("--synth-train", synth.num_train);
  prepare->add_option("--synth-test", synth.num_test);
  prepare->add_option("--synth-min-len", synth.min_len);
  prepare->add_option("--synth-max-len", synth.max_len);
  prepare->add_option("--synth-conditions", synth.num_conditions);

  // train
  auto* train = app.add_subcommand("train", "Train one model");
  std::string config_file;
  fs::path prepared_dir;
  std::uint64_t seed_value = 0;
  bool seed_given = false, ablate = false;
  int cap_value = 0;
  bool cap_given = false;
  train->add_option("--config", config_file, "key = value config file");
  train->add_option("--prepared", prepared_dir,
                    "Directory written by prepare")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed_value)->each([&](const std::string&) {
    seed_given = true;
  });
  train->add_option("--cap", cap_value)->each([&](const std::string&) {
    cap_given = true;
  });
  train->add_flag("--ablate", ablate, "Feed raw inputs directly to the LSTM");

  // experiment
  auto* experiment = app.add_subcommand(
      "experiment", "Train one model per seed and report mean +/- std");
  std::string seeds_text;
  std::size_t jobs = 1;
  experiment->add_option("--config", config_file);
  experiment->add_option("--prepared", prepared_dir)->required();
  experiment->add_option("--seeds", seeds_text, "Comma-separated seed list")
      ->required();
  experiment->add_option("--out", out_dir)->required();
  experiment->add_option("--jobs", jobs, "Parallel training runs");
  experiment->add_option("--cap", cap_value)->each([&](const std::string&) {
    cap_given = true;
  });
  experiment->add_flag("--ablate", ablate,
                       "Also run the no-first-MLP variant");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  fs::path checkpoint_path;
  bool uncapped_targets = false;
  eval->add_option("--checkpoint", checkpoint_path)->required();
  eval->add_option("--prepared", prepared_dir)->required();
  eval->add_option("--out", out_dir)->required();
  eval->add_flag("--uncapped-targets", uncapped_targets,
                 "Compare against raw test RUL instead of capped");

  // export-activations
  auto* export_act = app.add_subcommand(
      "export-activations", "Dump per-cycle activations of one unit as CSV");
  int unit_id = 0;
  std::string split = "train";
  export_act->add_option("--checkpoint", checkpoint_path)->required();
  export_act->add_option("--prepared", prepared_dir)->required();
  export_act->add_option("--unit", unit_id)->required();
  export_act->add_option("--split", split)
      ->check(CLI::IsMember({"train", "test"}));
  export_act->add_option("--out", out_dir)->required();

  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();  // accept --kernels after the subcommand name too
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (!kernels_name.empty() && !rul::kernels::select(kernels_name)) {
      throw std::runtime_error("unknown or unsupported kernel backend '" +
                               kernels_name + "'");
    }
    const std::optional<fs::path> config_path =
        config_file.empty() ? std::nullopt
                            : std::optional<fs::path>(config_file);
    const std::optional<std::uint64_t> seed_opt =
        seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    const std::optional<int> cap_opt =
        cap_given ? std::optional<int>(cap_value) : std::nullopt;

    if (prepare->parsed()) {
      synth.seed = synth_seed;
      return cmd_prepare(dataset, data_root, cap, out_dir, synth);
    }
    if (train->parsed()) {
      return cmd_train(config_path, prepared_dir, out_dir, seed_opt, cap_opt,
                       ablate);
    }
    if (experiment->parsed()) {
      return cmd_experiment(config_path, prepared_dir, seeds_text, out_dir,
                            jobs, ablate, cap_opt);
    }
    if (eval->parsed()) {
      return cmd_eval(checkpoint_path, prepared_dir, out_dir,
                      uncapped_targets);
    }
    if (export_act->parsed()) {
      return cmd_export_activations(checkpoint_path, prepared_dir, unit_id,
                                    split, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
