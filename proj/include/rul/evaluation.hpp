#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rul/labeling.hpp"
#include "rul/network.hpp"

namespace rul {

// Asymmetric penalty of one residual (cycles, predicted minus gold). Late
// predictions (d >= 0) weigh heavier than early ones.
double score_term(double residual_cycles);

// clamp(y, 0, 1) * cap. The final tanh can undershoot 0; clamp instead of
// letting negative cycle counts into the metrics.
double denormalize_prediction(double y_hat_normalized, int cap);

struct EvalResult {
  double rmse = 0.0;   // cycles
  double score = 0.0;
  std::vector<double> residuals;  // cycles
};

// One residual per engine, taken at its final observed cycle.
// RMSE = sqrt(mean_j d_j^2), Score = sum_j score_term(d_j).
EvalResult evaluate_last_cycle(const ModelParams& params,
                               std::span<const Trajectory> test,
                               std::span<const int> test_rul,
                               const NormalizationStats& stats, int cap,
                               bool cap_targets = true);
EvalResult evaluate_last_cycle_labeled(const ModelParams& params,
                                       std::span<const LabeledTrajectory> test,
                                       std::span<const int> test_rul, int cap,
                                       bool cap_targets = true);

// Every cycle of every engine: Score = sum_j sum_t s(d), RMSE with
// per-trajectory averaging, sqrt(mean_j mean_t d^2).
EvalResult evaluate_per_cycle(const ModelParams& params,
                              std::span<const LabeledTrajectory> labeled,
                              int cap);

struct EvalReport {
  std::string dataset;
  double rmse_last_cycle = 0.0;
  double score_last_cycle = 0.0;
  double rmse_per_cycle = 0.0;
  double score_per_cycle = 0.0;
  std::vector<double> residuals_last_cycle;

  std::string to_json() const;
};

EvalReport evaluate_bundle(const ModelParams& params,
                           std::span<const LabeledTrajectory> labeled_test,
                           std::span<const int> test_rul,
                           const std::string& dataset_name, int cap,
                           bool cap_targets = true);

struct ActivationExport {
  Matrix inputs;        // T x input_dim, normalized
  Matrix features;      // T x feature width; empty when ablated
  Matrix lstm_outputs;  // T x cells
  Matrix predictions;   // T x 1
};

ActivationExport export_activations(const ModelParams& params,
                                    const Matrix& normalized_sequence);
ActivationExport export_activations(const ModelParams& params,
                                    const Trajectory& raw,
                                    const NormalizationStats& stats);

// Header row "prefix_1,..,prefix_n", '.' decimal separator, full precision.
void write_matrix_csv(std::ostream& out, const Matrix& m,
                      std::string_view column_prefix);

// Published results on this benchmark, kept as constants for report context.
struct ReferenceRow {
  const char* dataset;
  double rmse_mean, rmse_std;
  double score_mean, score_std;
};
std::span<const ReferenceRow> reference_results(bool ablated);

}  // namespace rul
