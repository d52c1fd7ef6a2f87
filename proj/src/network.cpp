#include "rul/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rul/kernels.hpp"

namespace rul {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// z = bias + W * in, tanh applied in place.
void dense_tanh(const DenseLayer& layer, std::span<const double> in,
                std::span<double> out) {
  std::copy(layer.bias.begin(), layer.bias.end(), out.begin());
  kernels::active().matvec_acc(out.data(), layer.weight.data(), in.data(),
                               layer.weight.rows(), layer.weight.cols());
  for (double& v : out) {
    v = std::tanh(v);
  }
}

double rmse_loss(const ForwardTrace& trace, std::span<const double> targets) {
  double sum = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double d = trace.prediction(t) - targets[t];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(targets.size()));
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (double& v : w.flat()) {
    v = rng.uniform(-limit, limit);
  }
  return w;
}

}  // namespace

void ModelArchitecture::validate() const {
  if (input_dim < 1) {
    throw std::invalid_argument("architecture: input_dim must be positive");
  }
  if (feature_mlp_dims.empty() && !ablate_feature_mlp) {
    throw std::invalid_argument("architecture: feature MLP needs layers");
  }
  for (std::size_t d : feature_mlp_dims) {
    if (d < 1) {
      throw std::invalid_argument("architecture: zero-width feature layer");
    }
  }
  if (lstm_cells < 1) {
    throw std::invalid_argument("architecture: lstm_cells must be positive");
  }
  if (regression_mlp_dims.empty() || regression_mlp_dims.back() != 1) {
    throw std::invalid_argument(
        "architecture: regression MLP must end in a single output");
  }
  for (std::size_t d : regression_mlp_dims) {
    if (d < 1) {
      throw std::invalid_argument("architecture: zero-width regression layer");
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("architecture: dropout must be in [0,1)");
  }
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const double*, std::size_t rows,
                      std::size_t cols) { n += rows * cols; });
  return n;
}

std::vector<std::pair<std::string, std::size_t>> ModelParams::tensor_groups()
    const {
  std::vector<std::pair<std::string, std::size_t>> groups;
  for_each_tensor([&](const std::string& name, const double*, std::size_t rows,
                      std::size_t cols) {
    groups.emplace_back(name, rows * cols);
  });
  return groups;
}

ModelParams init_params(const ModelArchitecture& arch, Rng& rng) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  if (!arch.ablate_feature_mlp) {
    std::size_t in = arch.input_dim;
    for (std::size_t out : arch.feature_mlp_dims) {
      p.feature_mlp.push_back(
          {glorot_uniform(out, in, rng), std::vector<double>(out, 0.0)});
      in = out;
    }
  }
  const std::size_t cells = arch.lstm_cells;
  const std::size_t lstm_in = arch.lstm_input_dim();
  for (std::size_t g = 0; g < 4; ++g) {
    p.lstm[g].input_weight = glorot_uniform(cells, lstm_in, rng);
    p.lstm[g].recurrent_weight = glorot_uniform(cells, cells, rng);
    // Forget gate starts open so early training can carry state.
    p.lstm[g].bias.assign(cells, g == 1 ? 1.0 : 0.0);
  }
  std::size_t in = cells;
  for (std::size_t out : arch.regression_mlp_dims) {
    p.regression_mlp.push_back(
        {glorot_uniform(out, in, rng), std::vector<double>(out, 0.0)});
    in = out;
  }
  return p;
}

ModelParams zero_params_like(const ModelArchitecture& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  if (!arch.ablate_feature_mlp) {
    std::size_t in = arch.input_dim;
    for (std::size_t out : arch.feature_mlp_dims) {
      p.feature_mlp.push_back({Matrix(out, in), std::vector<double>(out, 0.0)});
      in = out;
    }
  }
  const std::size_t cells = arch.lstm_cells;
  const std::size_t lstm_in = arch.lstm_input_dim();
  for (auto& gate : p.lstm) {
    gate.input_weight = Matrix(cells, lstm_in);
    gate.recurrent_weight = Matrix(cells, cells);
    gate.bias.assign(cells, 0.0);
  }
  std::size_t in = cells;
  for (std::size_t out : arch.regression_mlp_dims) {
    p.regression_mlp.push_back({Matrix(out, in), std::vector<double>(out, 0.0)});
    in = out;
  }
  return p;
}

ForwardTrace forward(const ModelParams& params, const Matrix& sequence) {
  const auto& arch = params.arch;
  if (sequence.rows() == 0) {
    throw std::invalid_argument("forward: empty sequence");
  }
  if (sequence.cols() != arch.input_dim) {
    throw std::invalid_argument(
        "forward: sequence dim " + std::to_string(sequence.cols()) +
        " does not match input_dim " + std::to_string(arch.input_dim));
  }
  const std::size_t T = sequence.rows();
  const std::size_t cells = arch.lstm_cells;
  const auto& k = kernels::active();

  ForwardTrace trace;
  trace.length = T;
  for (const auto& layer : params.feature_mlp) {
    trace.feature_acts.emplace_back(T, layer.weight.rows());
  }
  trace.gate_i = Matrix(T, cells);
  trace.gate_f = Matrix(T, cells);
  trace.gate_g = Matrix(T, cells);
  trace.gate_o = Matrix(T, cells);
  trace.cell = Matrix(T, cells);
  trace.cell_tanh = Matrix(T, cells);
  trace.hidden = Matrix(T, cells);
  for (const auto& layer : params.regression_mlp) {
    trace.regression_acts.emplace_back(T, layer.weight.rows());
  }

  const std::vector<double> zeros(cells, 0.0);
  std::array<std::vector<double>, 4> pre_gate;
  for (auto& z : pre_gate) {
    z.resize(cells);
  }

  for (std::size_t t = 0; t < T; ++t) {
    std::span<const double> cur = sequence.row(t);
    for (std::size_t l = 0; l < params.feature_mlp.size(); ++l) {
      dense_tanh(params.feature_mlp[l], cur, trace.feature_acts[l].row(t));
      cur = trace.feature_acts[l].row(t);
    }

    const std::span<const double> h_prev =
        t > 0 ? std::span<const double>(trace.hidden.row(t - 1))
              : std::span<const double>(zeros);
    const std::span<const double> c_prev =
        t > 0 ? std::span<const double>(trace.cell.row(t - 1))
              : std::span<const double>(zeros);

    for (std::size_t g = 0; g < 4; ++g) {
      const auto& gate = params.lstm[g];
      auto& z = pre_gate[g];
      std::copy(gate.bias.begin(), gate.bias.end(), z.begin());
      k.matvec_acc(z.data(), gate.input_weight.data(), cur.data(), cells,
                   gate.input_weight.cols());
      k.matvec_acc(z.data(), gate.recurrent_weight.data(), h_prev.data(),
                   cells, cells);
    }
    auto gi = trace.gate_i.row(t);
    auto gf = trace.gate_f.row(t);
    auto gg = trace.gate_g.row(t);
    auto go = trace.gate_o.row(t);
    for (std::size_t j = 0; j < cells; ++j) {
      gi[j] = sigmoid(pre_gate[0][j]);
      gf[j] = sigmoid(pre_gate[1][j]);
      gg[j] = std::tanh(pre_gate[2][j]);
      go[j] = sigmoid(pre_gate[3][j]);
    }
    auto c = trace.cell.row(t);
    k.mul_acc(c.data(), gf.data(), c_prev.data(), cells);
    k.mul_acc(c.data(), gi.data(), gg.data(), cells);
    auto ct = trace.cell_tanh.row(t);
    auto h = trace.hidden.row(t);
    for (std::size_t j = 0; j < cells; ++j) {
      ct[j] = std::tanh(c[j]);
      h[j] = go[j] * ct[j];
    }

    cur = h;
    for (std::size_t l = 0; l < params.regression_mlp.size(); ++l) {
      dense_tanh(params.regression_mlp[l], cur, trace.regression_acts[l].row(t));
      cur = trace.regression_acts[l].row(t);
    }
  }

  trace.hidden.check_finite("forward: LSTM hidden state");
  trace.predictions().check_finite("forward: predictions");
  return trace;
}

void backward_into(const ModelParams& params, const Matrix& sequence,
                   const ForwardTrace& trace,
                   std::span<const double> prediction_grad,
                   ModelParams& grad_acc) {
  const auto& arch = params.arch;
  const std::size_t T = trace.length;
  if (prediction_grad.size() != T) {
    throw std::invalid_argument("backward: gradient length mismatch");
  }
  const std::size_t cells = arch.lstm_cells;
  const auto& k = kernels::active();

  const std::vector<double> zeros(cells, 0.0);
  std::vector<double> d_hidden_carry(cells, 0.0);
  std::vector<double> d_cell_carry(cells, 0.0);

  // Scratch for MLP backprop, sized per layer.
  const std::size_t reg_layers = params.regression_mlp.size();
  std::vector<std::vector<double>> d_reg(reg_layers + 1);
  d_reg[0].resize(cells);
  for (std::size_t l = 0; l < reg_layers; ++l) {
    d_reg[l + 1].resize(params.regression_mlp[l].weight.rows());
  }
  const std::size_t feat_layers = params.feature_mlp.size();
  std::vector<std::vector<double>> d_feat(feat_layers + 1);
  if (feat_layers > 0) {
    d_feat[0].resize(arch.input_dim);
    for (std::size_t l = 0; l < feat_layers; ++l) {
      d_feat[l + 1].resize(params.feature_mlp[l].weight.rows());
    }
  }
  std::vector<double> dz(std::max({cells, std::size_t{1}}));
  std::array<std::vector<double>, 4> d_gate;
  for (auto& v : d_gate) {
    v.resize(cells);
  }
  std::vector<double> d_cell(cells);
  std::vector<double> d_lstm_in(arch.lstm_input_dim());

  for (std::size_t rt = T; rt > 0; --rt) {
    const std::size_t t = rt - 1;

    // Regression MLP: from the scalar prediction gradient down to d(hidden).
    d_reg[reg_layers][0] = prediction_grad[t];
    for (std::size_t l = reg_layers; l > 0; --l) {
      const auto& layer = params.regression_mlp[l - 1];
      auto& g_layer = grad_acc.regression_mlp[l - 1];
      const auto act = trace.regression_acts[l - 1].row(t);
      const std::size_t out = layer.weight.rows();
      dz.resize(out);
      for (std::size_t j = 0; j < out; ++j) {
        dz[j] = d_reg[l][j] * (1.0 - act[j] * act[j]);
      }
      const std::span<const double> in =
          l > 1 ? std::span<const double>(trace.regression_acts[l - 2].row(t))
                : std::span<const double>(trace.hidden.row(t));
      k.ger_acc(g_layer.weight.data(), dz.data(), in.data(), out,
                layer.weight.cols());
      k.axpy(g_layer.bias.data(), 1.0, dz.data(), out);
      auto& below = d_reg[l - 1];
      std::fill(below.begin(), below.end(), 0.0);
      k.matvec_t_acc(below.data(), layer.weight.data(), dz.data(), out,
                     layer.weight.cols());
    }

    // d(hidden) = regression path + recurrent carry.
    auto& dh = d_reg[0];
    for (std::size_t j = 0; j < cells; ++j) {
      dh[j] += d_hidden_carry[j];
    }

    const auto gi = trace.gate_i.row(t);
    const auto gf = trace.gate_f.row(t);
    const auto gg = trace.gate_g.row(t);
    const auto go = trace.gate_o.row(t);
    const auto ct = trace.cell_tanh.row(t);
    const std::span<const double> c_prev =
        t > 0 ? std::span<const double>(trace.cell.row(t - 1))
              : std::span<const double>(zeros);
    const std::span<const double> h_prev =
        t > 0 ? std::span<const double>(trace.hidden.row(t - 1))
              : std::span<const double>(zeros);

    for (std::size_t j = 0; j < cells; ++j) {
      const double d_o = dh[j] * ct[j];
      d_gate[3][j] = d_o * go[j] * (1.0 - go[j]);
      const double d_tanh_c = dh[j] * go[j];
      d_cell[j] = d_cell_carry[j] + d_tanh_c * (1.0 - ct[j] * ct[j]);
      const double d_f = d_cell[j] * c_prev[j];
      d_gate[1][j] = d_f * gf[j] * (1.0 - gf[j]);
      const double d_i = d_cell[j] * gg[j];
      d_gate[0][j] = d_i * gi[j] * (1.0 - gi[j]);
      const double d_g = d_cell[j] * gi[j];
      d_gate[2][j] = d_g * (1.0 - gg[j] * gg[j]);
      d_cell_carry[j] = d_cell[j] * gf[j];
    }

    const std::span<const double> lstm_in =
        arch.ablate_feature_mlp
            ? std::span<const double>(sequence.row(t))
            : std::span<const double>(trace.feature_output().row(t));
    std::fill(d_lstm_in.begin(), d_lstm_in.end(), 0.0);
    std::fill(d_hidden_carry.begin(), d_hidden_carry.end(), 0.0);
    for (std::size_t g = 0; g < 4; ++g) {
      const auto& gate = params.lstm[g];
      auto& g_gate = grad_acc.lstm[g];
      k.ger_acc(g_gate.input_weight.data(), d_gate[g].data(), lstm_in.data(),
                cells, gate.input_weight.cols());
      k.ger_acc(g_gate.recurrent_weight.data(), d_gate[g].data(), h_prev.data(),
                cells, cells);
      k.axpy(g_gate.bias.data(), 1.0, d_gate[g].data(), cells);
      k.matvec_t_acc(d_lstm_in.data(), gate.input_weight.data(),
                     d_gate[g].data(), cells, gate.input_weight.cols());
      k.matvec_t_acc(d_hidden_carry.data(), gate.recurrent_weight.data(),
                     d_gate[g].data(), cells, cells);
    }

    if (!arch.ablate_feature_mlp) {
      std::copy(d_lstm_in.begin(), d_lstm_in.end(), d_feat[feat_layers].begin());
      for (std::size_t l = feat_layers; l > 0; --l) {
        const auto& layer = params.feature_mlp[l - 1];
        auto& g_layer = grad_acc.feature_mlp[l - 1];
        const auto act = trace.feature_acts[l - 1].row(t);
        const std::size_t out = layer.weight.rows();
        dz.resize(out);
        for (std::size_t j = 0; j < out; ++j) {
          dz[j] = d_feat[l][j] * (1.0 - act[j] * act[j]);
        }
        const std::span<const double> in =
            l > 1 ? std::span<const double>(trace.feature_acts[l - 2].row(t))
                  : std::span<const double>(sequence.row(t));
        k.ger_acc(g_layer.weight.data(), dz.data(), in.data(), out,
                  layer.weight.cols());
        k.axpy(g_layer.bias.data(), 1.0, dz.data(), out);
        auto& below = d_feat[l - 1];
        std::fill(below.begin(), below.end(), 0.0);
        k.matvec_t_acc(below.data(), layer.weight.data(), dz.data(), out,
                       layer.weight.cols());
      }
    }
  }
}

BackwardResult backward(const ModelParams& params, const Matrix& sequence,
                        std::span<const double> targets) {
  if (targets.size() != sequence.rows()) {
    throw std::invalid_argument("backward: target length mismatch");
  }
  const ForwardTrace trace = forward(params, sequence);
  const double loss = rmse_loss(trace, targets);
  BackwardResult result;
  result.gradients = zero_params_like(params.arch);
  result.loss = loss;
  const std::size_t T = targets.size();
  std::vector<double> dpred(T, 0.0);
  if (loss > 0.0) {
    // d RMSE / d y_t = (y_t - target_t) / (T * RMSE)
    const double scale = 1.0 / (static_cast<double>(T) * loss);
    for (std::size_t t = 0; t < T; ++t) {
      dpred[t] = (trace.prediction(t) - targets[t]) * scale;
    }
  }
  backward_into(params, sequence, trace, dpred, result.gradients);
  result.gradients.for_each_tensor(
      [](const std::string& name, const double* data, std::size_t rows,
         std::size_t cols) {
        check_finite("gradient " + name, {data, rows * cols});
      });
  return result;
}

double gradient_check(const ModelArchitecture& arch, std::uint64_t seed,
                      std::size_t sequence_length, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw std::invalid_argument("gradient_check: eps must be in (0, 1e-2]");
  }
  arch.validate();
  Rng rng(seed);
  ModelParams params = init_params(arch, rng);
  Matrix sequence(sequence_length, arch.input_dim);
  for (double& v : sequence.flat()) {
    v = rng.uniform();
  }
  std::vector<double> targets(sequence_length);
  for (double& v : targets) {
    v = rng.uniform();
  }

  const BackwardResult analytic = backward(params, sequence, targets);

  struct TensorRef {
    double* data;
    std::size_t size;
  };
  std::vector<TensorRef> param_refs;
  params.for_each_tensor([&](const std::string&, double* data,
                             std::size_t rows, std::size_t cols) {
    param_refs.push_back({data, rows * cols});
  });
  std::vector<std::pair<const double*, std::size_t>> grad_spans;
  analytic.gradients.for_each_tensor(
      [&](const std::string&, const double* data, std::size_t rows,
          std::size_t cols) { grad_spans.emplace_back(data, rows * cols); });

  double max_rel = 0.0;
  for (std::size_t ti = 0; ti < param_refs.size(); ++ti) {
    auto [data, size] = param_refs[ti];
    const double* grad = grad_spans[ti].first;
    for (std::size_t i = 0; i < size; ++i) {
      const double original = data[i];
      data[i] = original + eps;
      const double loss_plus = rmse_loss(forward(params, sequence), targets);
      data[i] = original - eps;
      const double loss_minus = rmse_loss(forward(params, sequence), targets);
      data[i] = original;
      const double numeric = (loss_plus - loss_minus) / (2.0 * eps);
      const double analytic_v = grad[i];
      const double rel = std::abs(analytic_v - numeric) /
                         std::max({std::abs(analytic_v), std::abs(numeric),
                                   1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace rul
