#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rul/labeling.hpp"
#include "rul/network.hpp"

namespace rul {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 5;
  int cap = 130;
  double train_fraction = 0.75;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;  // epochs past the best validation RMSE
  std::optional<double> grad_clip;  // global L2 max-norm when set
  std::uint64_t seed = 1;
  ModelArchitecture arch;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean batch RMSE, normalized units
  double val_rmse = 0.0;    // per-cycle, denormalized cycles
  double val_score = 0.0;   // per-cycle

  bool operator==(const EpochStats&) const = default;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; minimum val_rmse

  void write_csv(std::ostream& out) const;
  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  ModelParams params;  // snapshot from the best epoch
  TrainHistory history;
};

// Per-sequence RMSE in normalized units: sqrt(mean_t (pred - target)^2).
double sequence_loss(std::span<const double> predictions,
                     std::span<const double> targets);

// Loss of a batch of whole sequences: sqrt(mean over sequences of the
// per-sequence MSE), mirroring the per-trajectory averaging of the
// evaluation RMSE.
double batch_loss(std::span<const double> per_sequence_mse);

// Trains on whole variable-length sequences, batches of `batch_size`
// engines, one optimizer step per batch, early stopping on validation RMSE.
// Deterministic for a given config.
TrainResult train_one(const TrainConfig& config,
                      std::span<const LabeledTrajectory> train_set,
                      std::span<const LabeledTrajectory> val_set);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1); 0 for a single value
  std::vector<double> values;
};

MetricStats summarize_metric(std::span<const double> values);

struct MultiRunResult {
  std::vector<std::uint64_t> seeds;
  MetricStats rmse_last_cycle;
  MetricStats score_last_cycle;
  MetricStats rmse_per_cycle;
  MetricStats score_per_cycle;
};

// One training run per seed (optionally `jobs` in parallel), each evaluated
// on the test split; reports mean and standard deviation per metric. The
// train/validation split is re-drawn from each seed.
MultiRunResult multi_run(const TrainConfig& base,
                         const DatasetBundle& bundle,
                         std::span<const std::uint64_t> seeds,
                         std::size_t jobs = 1);

// Same, over an already normalized and labeled dataset.
MultiRunResult multi_run_labeled(const TrainConfig& base,
                                 std::span<const LabeledTrajectory> train,
                                 std::span<const LabeledTrajectory> test,
                                 std::span<const int> test_rul,
                                 std::span<const std::uint64_t> seeds,
                                 std::size_t jobs = 1);

}  // namespace rul
