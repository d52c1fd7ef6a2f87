#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rul/matrix.hpp"
#include "rul/rng.hpp"

namespace rul {

// Sequence model: a per-frame feature MLP (weights shared across time), one
// LSTM layer, and a per-frame regression MLP ending in a scalar. Every MLP
// layer, including the final scalar, is followed by tanh.
struct ModelArchitecture {
  std::size_t input_dim = 24;
  std::vector<std::size_t> feature_mlp_dims = {100, 50, 50};
  std::size_t lstm_cells = 60;
  std::vector<std::size_t> regression_mlp_dims = {60, 30, 1};
  double dropout = 0.0;  // carried for configurability; 0 is the supported value
  bool ablate_feature_mlp = false;

  // What the LSTM consumes: the feature-MLP output, or the raw input when
  // the first MLP is ablated.
  std::size_t lstm_input_dim() const {
    return ablate_feature_mlp ? input_dim : feature_mlp_dims.back();
  }

  void validate() const;  // throws std::invalid_argument
  bool operator==(const ModelArchitecture&) const = default;
};

struct DenseLayer {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out
};

// Gate order everywhere: input, forget, candidate, output.
inline constexpr std::array<const char*, 4> kGateNames = {"i", "f", "g", "o"};

struct LstmGate {
  Matrix input_weight;      // cells x lstm_input_dim
  Matrix recurrent_weight;  // cells x cells
  std::vector<double> bias; // cells
};

struct ModelParams {
  ModelArchitecture arch;
  std::vector<DenseLayer> feature_mlp;  // empty when ablated
  std::array<LstmGate, 4> lstm;
  std::vector<DenseLayer> regression_mlp;

  // Visits every tensor in canonical order: feature layers, LSTM gates
  // (input weight, recurrent weight, bias per gate), regression layers.
  // f(name, data, rows, cols); bias tensors have cols == 1.
  template <class F>
  void for_each_tensor(F&& f);
  template <class F>
  void for_each_tensor(F&& f) const;

  std::size_t parameter_count() const;
  std::vector<std::pair<std::string, std::size_t>> tensor_groups() const;
};

// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1. Tensors are
// filled in canonical order so a seed pins the whole parameter set.
ModelParams init_params(const ModelArchitecture& arch, Rng& rng);
ModelParams zero_params_like(const ModelArchitecture& arch);

// Per-cycle activations of every layer for one sequence.
struct ForwardTrace {
  std::size_t length = 0;
  std::vector<Matrix> feature_acts;  // per feature layer, T x dim
  Matrix gate_i, gate_f, gate_g, gate_o;  // T x cells
  Matrix cell, cell_tanh, hidden;         // T x cells
  std::vector<Matrix> regression_acts;    // per regression layer, last T x 1

  const Matrix& feature_output() const { return feature_acts.back(); }
  const Matrix& predictions() const { return regression_acts.back(); }
  double prediction(std::size_t t) const { return predictions()(t, 0); }
};

// Runs the model over a full sequence (rows are cycles). h_0 = c_0 = 0.
ForwardTrace forward(const ModelParams& params, const Matrix& sequence);

struct BackwardResult {
  ModelParams gradients;
  double loss = 0.0;  // per-sequence RMSE in normalized units
};

// Gradients of the per-sequence RMSE loss via reverse accumulation through
// time. Returned unclipped. At an exact fit (zero loss) gradients are zero.
BackwardResult backward(const ModelParams& params, const Matrix& sequence,
                        std::span<const double> targets);

// Low-level entry point: accumulates d(loss)/d(params) into grad_acc given
// d(loss)/d(prediction) per cycle. Lets the trainer scale per the batch loss.
void backward_into(const ModelParams& params, const Matrix& sequence,
                   const ForwardTrace& trace,
                   std::span<const double> prediction_grad,
                   ModelParams& grad_acc);

// Compares analytic gradients against central finite differences on randomly
// initialized parameters/inputs/targets. Returns the max relative error
// |a - n| / max(|a|, |n|, 1e-8) over all parameters.
double gradient_check(const ModelArchitecture& arch, std::uint64_t seed,
                      std::size_t sequence_length, double eps);

// --- template bodies ---

namespace detail {
template <class F, class Params>
void visit_tensors(Params& p, F&& f) {
  for (std::size_t l = 0; l < p.feature_mlp.size(); ++l) {
    auto& layer = p.feature_mlp[l];
    const std::string prefix = "fmlp." + std::to_string(l);
    f(prefix + ".W", layer.weight.data(), layer.weight.rows(),
      layer.weight.cols());
    f(prefix + ".b", layer.bias.data(), layer.bias.size(), std::size_t{1});
  }
  for (std::size_t g = 0; g < 4; ++g) {
    auto& gate = p.lstm[g];
    const std::string suffix = kGateNames[g];
    f("lstm.Wx." + suffix, gate.input_weight.data(), gate.input_weight.rows(),
      gate.input_weight.cols());
    f("lstm.Wh." + suffix, gate.recurrent_weight.data(),
      gate.recurrent_weight.rows(), gate.recurrent_weight.cols());
    f("lstm.b." + suffix, gate.bias.data(), gate.bias.size(), std::size_t{1});
  }
  for (std::size_t l = 0; l < p.regression_mlp.size(); ++l) {
    auto& layer = p.regression_mlp[l];
    const std::string prefix = "rmlp." + std::to_string(l);
    f(prefix + ".W", layer.weight.data(), layer.weight.rows(),
      layer.weight.cols());
    f(prefix + ".b", layer.bias.data(), layer.bias.size(), std::size_t{1});
  }
}
}  // namespace detail

template <class F>
void ModelParams::for_each_tensor(F&& f) {
  detail::visit_tensors(*this, std::forward<F>(f));
}

template <class F>
void ModelParams::for_each_tensor(F&& f) const {
  detail::visit_tensors(*this, std::forward<F>(f));
}

}  // namespace rul
