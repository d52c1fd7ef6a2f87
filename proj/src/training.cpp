#include "rul/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "rul/adam.hpp"
#include "rul/evaluation.hpp"

namespace rul {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("config: learning_rate must be positive");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("config: batch_size must be at least 1");
  }
  if (cap < 1) {
    throw std::invalid_argument("config: cap must be positive");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("config: train_fraction must be in (0,1)");
  }
  if (max_epochs < 1) {
    throw std::invalid_argument("config: max_epochs must be at least 1");
  }
  if (grad_clip && !(*grad_clip > 0.0)) {
    throw std::invalid_argument("config: grad_clip must be positive");
  }
  arch.validate();
}

double sequence_loss(std::span<const double> predictions,
                     std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("sequence_loss: length mismatch");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("sequence_loss: empty sequence");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    const double d = predictions[t] - targets[t];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double batch_loss(std::span<const double> per_sequence_mse) {
  if (per_sequence_mse.empty()) {
    throw std::invalid_argument("batch_loss: empty batch");
  }
  double sum = 0.0;
  for (double mse : per_sequence_mse) {
    sum += mse;
  }
  return std::sqrt(sum / static_cast<double>(per_sequence_mse.size()));
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_rmse,val_score\n";
  char buf[96];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch,
                  e.train_loss, e.val_rmse, e.val_score);
    out << buf;
  }
}

namespace {

std::vector<std::span<double>> tensor_spans(ModelParams& p) {
  std::vector<std::span<double>> spans;
  p.for_each_tensor([&](const std::string&, double* data, std::size_t rows,
                        std::size_t cols) {
    spans.emplace_back(data, rows * cols);
  });
  return spans;
}

}  // namespace

TrainResult train_one(const TrainConfig& config,
                      std::span<const LabeledTrajectory> train_set,
                      std::span<const LabeledTrajectory> val_set) {
  config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train_one: empty train or validation split");
  }
  for (const auto& traj : train_set) {
    if (traj.trajectory.features.cols() != config.arch.input_dim) {
      throw std::invalid_argument("train_one: feature dim mismatch");
    }
    if (traj.target.size() != traj.trajectory.length()) {
      throw std::invalid_argument("train_one: target length mismatch");
    }
  }

  Rng rng(config.seed);
  ModelParams params = init_params(config.arch, rng);
  ModelParams grads = zero_params_like(config.arch);
  Adam optimizer(params.tensor_groups());

  auto param_spans = tensor_spans(params);
  auto grad_spans_mut = tensor_spans(grads);
  std::vector<std::span<const double>> grad_spans(grad_spans_mut.begin(),
                                                  grad_spans_mut.end());

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  ModelParams best_params = params;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;

  std::vector<ForwardTrace> traces(config.batch_size);
  std::vector<double> mses(config.batch_size);
  std::vector<double> dpred;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batch_count = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t bsz = std::min(config.batch_size, n - start);
      try {
        for (std::size_t b = 0; b < bsz; ++b) {
          const auto& seq = train_set[order[start + b]];
          traces[b] = forward(params, seq.trajectory.features);
          double sq = 0.0;
          for (std::size_t t = 0; t < traces[b].length; ++t) {
            const double d = traces[b].prediction(t) - seq.target[t];
            sq += d * d;
          }
          mses[b] = sq / static_cast<double>(traces[b].length);
        }
        const double loss = batch_loss({mses.data(), bsz});
        if (!std::isfinite(loss)) {
          throw std::runtime_error("non-finite batch loss");
        }

        for (auto& span : grad_spans_mut) {
          std::fill(span.begin(), span.end(), 0.0);
        }
        if (loss > 0.0) {
          for (std::size_t b = 0; b < bsz; ++b) {
            const auto& seq = train_set[order[start + b]];
            const std::size_t T = traces[b].length;
            // d(batch RMSE)/d y_t = (y_t - target_t) / (B * T_b * loss)
            const double scale =
                1.0 / (static_cast<double>(bsz) * static_cast<double>(T) * loss);
            dpred.resize(T);
            for (std::size_t t = 0; t < T; ++t) {
              dpred[t] = (traces[b].prediction(t) - seq.target[t]) * scale;
            }
            backward_into(params, seq.trajectory.features, traces[b], dpred,
                          grads);
          }
        }
        if (config.grad_clip) {
          double sq_norm = 0.0;
          for (const auto& span : grad_spans) {
            for (double g : span) {
              sq_norm += g * g;
            }
          }
          const double norm = std::sqrt(sq_norm);
          if (norm > *config.grad_clip) {
            const double s = *config.grad_clip / norm;
            for (auto& span : grad_spans_mut) {
              for (double& g : span) {
                g *= s;
              }
            }
          }
        }
        optimizer.step(param_spans, grad_spans, config.learning_rate);
        loss_sum += loss;
        ++batch_count;
      } catch (const std::exception& e) {
        throw std::runtime_error(
            "training failed at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(start / config.batch_size + 1) + ": " + e.what());
      }
    }

    const EvalResult val = evaluate_per_cycle(params, val_set, config.cap);
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(batch_count),
                              val.rmse, val.score});
    if (val.rmse < best_rmse) {
      best_rmse = val.rmse;
      best_epoch = epoch;
      best_params = params;
    }
    if (epoch - best_epoch >= config.patience) {
      break;
    }
  }

  history.best_epoch = best_epoch;
  return {std::move(best_params), std::move(history)};
}

MetricStats summarize_metric(std::span<const double> values) {
  MetricStats stats;
  stats.values.assign(values.begin(), values.end());
  if (values.empty()) {
    return stats;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  stats.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) {
      const double d = v - stats.mean;
      sq += d * d;
    }
    stats.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return stats;
}

MultiRunResult multi_run_labeled(const TrainConfig& base,
                                 std::span<const LabeledTrajectory> train,
                                 std::span<const LabeledTrajectory> test,
                                 std::span<const int> test_rul,
                                 std::span<const std::uint64_t> seeds,
                                 std::size_t jobs) {
  if (seeds.empty()) {
    throw std::invalid_argument("multi_run: no seeds");
  }
  base.validate();

  struct RunMetrics {
    double rmse_last, score_last, rmse_cycle, score_cycle;
  };
  std::vector<RunMetrics> metrics(seeds.size());
  std::vector<std::string> failures(seeds.size());

  auto run_one = [&](std::size_t i) {
    try {
      TrainConfig cfg = base;
      cfg.seed = seeds[i];
      const auto [train_idx, val_idx] =
          split_indices(train.size(), cfg.train_fraction, cfg.seed);
      std::vector<LabeledTrajectory> tr, va;
      tr.reserve(train_idx.size());
      va.reserve(val_idx.size());
      for (std::size_t j : train_idx) {
        tr.push_back(train[j]);
      }
      for (std::size_t j : val_idx) {
        va.push_back(train[j]);
      }
      const TrainResult result = train_one(cfg, tr, va);
      const EvalResult last =
          evaluate_last_cycle_labeled(result.params, test, test_rul, cfg.cap);
      const EvalResult cycle = evaluate_per_cycle(result.params, test, cfg.cap);
      metrics[i] = {last.rmse, last.score, cycle.rmse, cycle.score};
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(
      1, std::min(jobs == 0 ? 1 : jobs, seeds.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      run_one(i);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= seeds.size()) {
            return;
          }
          run_one(i);
        }
      });
    }
    for (auto& t : pool) {
      t.join();
    }
  }

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!failures[i].empty()) {
      throw std::runtime_error("run with seed " + std::to_string(seeds[i]) +
                               " failed: " + failures[i]);
    }
  }

  MultiRunResult result;
  result.seeds.assign(seeds.begin(), seeds.end());
  std::vector<double> column(seeds.size());
  const auto collect = [&](auto member) {
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      column[i] = metrics[i].*member;
    }
    return summarize_metric(column);
  };
  result.rmse_last_cycle = collect(&RunMetrics::rmse_last);
  result.score_last_cycle = collect(&RunMetrics::score_last);
  result.rmse_per_cycle = collect(&RunMetrics::rmse_cycle);
  result.score_per_cycle = collect(&RunMetrics::score_cycle);
  return result;
}

MultiRunResult multi_run(const TrainConfig& base, const DatasetBundle& bundle,
                         std::span<const std::uint64_t> seeds,
                         std::size_t jobs) {
  const NormalizationStats stats = fit_normalizer(bundle.train);
  std::vector<LabeledTrajectory> train;
  train.reserve(bundle.train.size());
  for (const auto& traj : bundle.train) {
    train.push_back(label_train_trajectory(stats, traj, base.cap));
  }
  std::vector<LabeledTrajectory> test;
  test.reserve(bundle.test.size());
  for (std::size_t i = 0; i < bundle.test.size(); ++i) {
    test.push_back(label_test_trajectory(stats, bundle.test[i],
                                         bundle.test_rul[i], base.cap));
  }
  return multi_run_labeled(base, train, test, bundle.test_rul, seeds, jobs);
}

}  // namespace rul
