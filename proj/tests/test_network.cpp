#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rul/network.hpp"
#include "rul/training.hpp"

using namespace rul;

namespace {

// The gradient-check architecture: 3 -> [4,3] -> 5 LSTM cells -> [3,1].
ModelArchitecture tiny_arch(bool ablated = false) {
  ModelArchitecture arch;
  arch.input_dim = 3;
  arch.feature_mlp_dims = {4, 3};
  arch.lstm_cells = 5;
  arch.regression_mlp_dims = {3, 1};
  arch.ablate_feature_mlp = ablated;
  return arch;
}

Matrix random_sequence(Rng& rng, std::size_t T, std::size_t dim) {
  Matrix m(T, dim);
  for (double& v : m.flat()) {
    v = rng.uniform();
  }
  return m;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("tensor shapes are fully determined by the architecture") {
  for (bool ablated : {false, true}) {
    ModelArchitecture arch;  // full-size defaults
    arch.ablate_feature_mlp = ablated;
    Rng rng(1);
    const ModelParams p = init_params(arch, rng);
    const ModelParams z = zero_params_like(arch);

    std::vector<std::pair<std::string, std::size_t>> got, want;
    p.for_each_tensor([&](const std::string& n, const double*, std::size_t r,
                          std::size_t c) { got.emplace_back(n, r * c); });
    z.for_each_tensor([&](const std::string& n, const double*, std::size_t r,
                          std::size_t c) { want.emplace_back(n, r * c); });
    CHECK(got == want);
    CHECK(p.tensor_groups() == z.tensor_groups());

    if (!ablated) {
      REQUIRE(p.feature_mlp.size() == 3);
      CHECK(p.feature_mlp[0].weight.rows() == 100);
      CHECK(p.feature_mlp[0].weight.cols() == 24);
      CHECK(p.feature_mlp[1].weight.rows() == 50);
      CHECK(p.feature_mlp[1].weight.cols() == 100);
      CHECK(p.feature_mlp[2].weight.rows() == 50);
      CHECK(p.feature_mlp[2].weight.cols() == 50);
      CHECK(p.lstm[0].input_weight.cols() == 50);
    } else {
      CHECK(p.feature_mlp.empty());
      CHECK(p.lstm[0].input_weight.cols() == 24);
    }
    CHECK(p.lstm[0].input_weight.rows() == 60);
    CHECK(p.lstm[2].recurrent_weight.rows() == 60);
    CHECK(p.lstm[2].recurrent_weight.cols() == 60);
    REQUIRE(p.regression_mlp.size() == 3);
    CHECK(p.regression_mlp[0].weight.rows() == 60);
    CHECK(p.regression_mlp[0].weight.cols() == 60);
    CHECK(p.regression_mlp[1].weight.rows() == 30);
    CHECK(p.regression_mlp[1].weight.cols() == 60);
    CHECK(p.regression_mlp[2].weight.rows() == 1);
    CHECK(p.regression_mlp[2].weight.cols() == 30);
  }
}

TEST_CASE("init: glorot bounds, zero biases, forget bias one") {
  ModelArchitecture arch;
  Rng rng(5);
  const ModelParams p = init_params(arch, rng);
  const double bound = std::sqrt(6.0 / (100.0 + 24.0)) + 1e-15;
  for (double v : p.feature_mlp[0].weight.flat()) {
    CHECK(std::abs(v) <= bound);
  }
  for (const auto& layer : p.feature_mlp) {
    for (double b : layer.bias) {
      CHECK(b == 0.0);
    }
  }
  for (const auto& layer : p.regression_mlp) {
    for (double b : layer.bias) {
      CHECK(b == 0.0);
    }
  }
  for (double b : p.lstm[1].bias) {
    CHECK(b == 1.0);  // forget gate
  }
  for (std::size_t g : {std::size_t{0}, std::size_t{2}, std::size_t{3}}) {
    for (double b : p.lstm[g].bias) {
      CHECK(b == 0.0);
    }
  }
}

TEST_CASE("zero parameters give identically zero predictions") {
  const ModelParams p = zero_params_like(tiny_arch());
  Rng rng(2);
  const Matrix seq = random_sequence(rng, 6, 3);
  const ForwardTrace trace = forward(p, seq);
  REQUIRE(trace.length == 6);
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(trace.prediction(t) == 0.0);
    for (double h : trace.hidden.row(t)) {
      CHECK(h == 0.0);
    }
  }
}

TEST_CASE("one-cycle sequence produces length-1 traces") {
  Rng rng(3);
  const ModelParams p = init_params(tiny_arch(), rng);
  const Matrix seq = random_sequence(rng, 1, 3);
  const ForwardTrace trace = forward(p, seq);
  CHECK(trace.length == 1);
  CHECK(trace.feature_output().rows() == 1);
  CHECK(trace.hidden.rows() == 1);
  CHECK(trace.predictions().rows() == 1);
  CHECK(trace.predictions().cols() == 1);
}

TEST_CASE("trace shapes follow the full architecture") {
  ModelArchitecture arch;
  Rng rng(4);
  const ModelParams p = init_params(arch, rng);
  const Matrix seq = random_sequence(rng, 17, 24);
  const ForwardTrace trace = forward(p, seq);
  CHECK(trace.feature_output().rows() == 17);
  CHECK(trace.feature_output().cols() == 50);
  CHECK(trace.hidden.cols() == 60);
  CHECK(trace.cell.cols() == 60);
}

TEST_CASE("predictions stay inside (-1, 1)") {
  Rng rng(6);
  const ModelParams p = init_params(tiny_arch(), rng);
  const Matrix seq = random_sequence(rng, 50, 3);
  const ForwardTrace trace = forward(p, seq);
  for (std::size_t t = 0; t < trace.length; ++t) {
    CHECK(trace.prediction(t) > -1.0);
    CHECK(trace.prediction(t) < 1.0);
  }
}

TEST_CASE("feature MLP is stateless across time; the LSTM is not") {
  Rng rng(7);
  const ModelParams p = init_params(tiny_arch(), rng);
  Matrix seq = random_sequence(rng, 9, 3);
  const ForwardTrace fwd = forward(p, seq);

  // Reverse the cycles.
  Matrix rev(seq.rows(), seq.cols());
  for (std::size_t t = 0; t < seq.rows(); ++t) {
    std::copy(seq.row(seq.rows() - 1 - t).begin(),
              seq.row(seq.rows() - 1 - t).end(), rev.row(t).begin());
  }
  const ForwardTrace bwd = forward(p, rev);

  // Feature activations permute with the cycles...
  for (std::size_t t = 0; t < seq.rows(); ++t) {
    const auto a = fwd.feature_output().row(seq.rows() - 1 - t);
    const auto b = bwd.feature_output().row(t);
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(a[j] == b[j]);
    }
  }
  // ...but the hidden state at the final cycle differs.
  bool differs = false;
  const auto ha = fwd.hidden.row(seq.rows() - 1);
  const auto hb = bwd.hidden.row(seq.rows() - 1);
  for (std::size_t j = 0; j < ha.size() && !differs; ++j) {
    differs = ha[j] != hb[j];
  }
  CHECK(differs);
}

TEST_CASE("backward: exact fit yields zero gradients") {
  const ModelParams p = zero_params_like(tiny_arch());
  Rng rng(8);
  const Matrix seq = random_sequence(rng, 5, 3);
  const std::vector<double> targets(5, 0.0);
  const BackwardResult result = backward(p, seq, targets);
  CHECK(result.loss == 0.0);
  result.gradients.for_each_tensor(
      [](const std::string&, const double* data, std::size_t rows,
         std::size_t cols) {
        for (std::size_t i = 0; i < rows * cols; ++i) {
          CHECK(data[i] == 0.0);
        }
      });
}

TEST_CASE("backward accumulation is additive across sequences") {
  Rng rng(9);
  const ModelParams p = init_params(tiny_arch(), rng);
  const Matrix seq = random_sequence(rng, 7, 3);
  std::vector<double> targets(7);
  for (double& v : targets) {
    v = rng.uniform();
  }
  const ForwardTrace trace = forward(p, seq);
  std::vector<double> dpred(7);
  for (std::size_t t = 0; t < 7; ++t) {
    dpred[t] = rng.uniform(-1.0, 1.0);
  }

  ModelParams once = zero_params_like(p.arch);
  backward_into(p, seq, trace, dpred, once);
  ModelParams twice = zero_params_like(p.arch);
  backward_into(p, seq, trace, dpred, twice);
  backward_into(p, seq, trace, dpred, twice);

  std::vector<const double*> once_ptr, twice_ptr;
  std::vector<std::size_t> sizes;
  once.for_each_tensor([&](const std::string&, const double* d, std::size_t r,
                           std::size_t c) {
    once_ptr.push_back(d);
    sizes.push_back(r * c);
  });
  twice.for_each_tensor([&](const std::string&, const double* d, std::size_t,
                            std::size_t) { twice_ptr.push_back(d); });
  for (std::size_t i = 0; i < once_ptr.size(); ++i) {
    for (std::size_t j = 0; j < sizes[i]; ++j) {
      CHECK(twice_ptr[i][j] == doctest::Approx(2.0 * once_ptr[i][j])
                                   .epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient check: full and ablated tiny architectures") {
  for (bool ablated : {false, true}) {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      const double err = gradient_check(tiny_arch(ablated), seed, 7, 1e-5);
      INFO("ablated=", ablated, " seed=", seed, " max rel err=", err);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("gradient check: determinism and eps precondition") {
  const double a = gradient_check(tiny_arch(), 42, 7, 1e-5);
  const double b = gradient_check(tiny_arch(), 42, 7, 1e-5);
  CHECK(a == b);
  CHECK_THROWS_AS(gradient_check(tiny_arch(), 1, 7, 1e-1),
                  std::invalid_argument);
}

TEST_CASE("architecture validation") {
  ModelArchitecture arch;
  arch.regression_mlp_dims = {30, 2};
  CHECK_THROWS_AS(arch.validate(), std::invalid_argument);
  arch = ModelArchitecture{};
  arch.dropout = 1.0;
  CHECK_THROWS_AS(arch.validate(), std::invalid_argument);
  arch = ModelArchitecture{};
  arch.input_dim = 0;
  CHECK_THROWS_AS(arch.validate(), std::invalid_argument);
}

TEST_CASE("forward rejects dimension mismatches and empty input") {
  Rng rng(10);
  const ModelParams p = init_params(tiny_arch(), rng);
  CHECK_THROWS_AS(forward(p, Matrix(3, 5)), std::invalid_argument);
  CHECK_THROWS_AS(forward(p, Matrix(0, 3)), std::invalid_argument);
}

}  // TEST_SUITE
