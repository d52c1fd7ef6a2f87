#include "rul/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "rul/rng.hpp"

namespace rul {

std::string NormalizationStats::to_json() const {
  nlohmann::json j;
  j["min"] = per_feature_min;
  j["max"] = per_feature_max;
  return j.dump(2);
}

NormalizationStats NormalizationStats::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  NormalizationStats stats;
  stats.per_feature_min = j.at("min").get<std::vector<double>>();
  stats.per_feature_max = j.at("max").get<std::vector<double>>();
  if (stats.per_feature_min.size() != stats.per_feature_max.size()) {
    throw std::runtime_error("normalization stats: min/max length mismatch");
  }
  for (std::size_t i = 0; i < stats.dim(); ++i) {
    if (stats.per_feature_min[i] > stats.per_feature_max[i]) {
      throw std::runtime_error("normalization stats: min > max at feature " +
                               std::to_string(i));
    }
  }
  return stats;
}

NormalizationStats fit_normalizer(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) {
    throw std::invalid_argument("fit_normalizer: no trajectories");
  }
  const std::size_t dim = trajectories.front().features.cols();
  NormalizationStats stats;
  stats.per_feature_min.assign(dim, std::numeric_limits<double>::infinity());
  stats.per_feature_max.assign(dim, -std::numeric_limits<double>::infinity());
  for (const auto& traj : trajectories) {
    if (traj.features.cols() != dim) {
      throw std::invalid_argument("fit_normalizer: inconsistent feature dim");
    }
    for (std::size_t t = 0; t < traj.length(); ++t) {
      const auto row = traj.features.row(t);
      for (std::size_t i = 0; i < dim; ++i) {
        stats.per_feature_min[i] = std::min(stats.per_feature_min[i], row[i]);
        stats.per_feature_max[i] = std::max(stats.per_feature_max[i], row[i]);
      }
    }
  }
  return stats;
}

Trajectory apply_normalizer(const NormalizationStats& stats,
                            const Trajectory& trajectory) {
  if (trajectory.features.cols() != stats.dim()) {
    throw std::invalid_argument(
        "apply_normalizer: feature dim " +
        std::to_string(trajectory.features.cols()) +
        " does not match stats dim " + std::to_string(stats.dim()));
  }
  Trajectory out = trajectory;
  for (std::size_t i = 0; i < stats.dim(); ++i) {
    const double lo = stats.per_feature_min[i];
    const double range = stats.per_feature_max[i] - lo;
    for (std::size_t t = 0; t < out.length(); ++t) {
      double& v = out.features(t, i);
      v = range == 0.0 ? 0.0 : (v - lo) / range;
    }
  }
  return out;
}

std::vector<int> gold_rul_train(int length, int cap) {
  if (length < 1) {
    throw std::invalid_argument("gold_rul_train: length must be positive");
  }
  if (cap < 1) {
    throw std::invalid_argument("gold_rul_train: cap must be positive");
  }
  std::vector<int> gold(length);
  for (int t = 1; t <= length; ++t) {
    gold[t - 1] = std::min(length - t, cap);
  }
  return gold;
}

std::vector<int> gold_rul_test(int rul_at_end, int length, int cap) {
  if (length < 1) {
    throw std::invalid_argument("gold_rul_test: length must be positive");
  }
  if (rul_at_end < 0) {
    throw std::invalid_argument("gold_rul_test: RUL must be nonnegative");
  }
  if (cap < 1) {
    throw std::invalid_argument("gold_rul_test: cap must be positive");
  }
  std::vector<int> gold(length);
  for (int t = 1; t <= length; ++t) {
    gold[t - 1] = std::min(rul_at_end + length - t, cap);
  }
  return gold;
}

namespace {

LabeledTrajectory assemble(const NormalizationStats& stats,
                           const Trajectory& trajectory,
                           std::vector<int> gold, int cap) {
  LabeledTrajectory labeled;
  labeled.trajectory = apply_normalizer(stats, trajectory);
  labeled.gold_rul = std::move(gold);
  labeled.target.resize(labeled.gold_rul.size());
  for (std::size_t t = 0; t < labeled.gold_rul.size(); ++t) {
    labeled.target[t] =
        static_cast<double>(labeled.gold_rul[t]) / static_cast<double>(cap);
  }
  return labeled;
}

}  // namespace

LabeledTrajectory label_train_trajectory(const NormalizationStats& stats,
                                         const Trajectory& trajectory,
                                         int cap) {
  return assemble(stats, trajectory,
                  gold_rul_train(static_cast<int>(trajectory.length()), cap),
                  cap);
}

LabeledTrajectory label_test_trajectory(const NormalizationStats& stats,
                                        const Trajectory& trajectory,
                                        int rul_at_end, int cap) {
  return assemble(
      stats, trajectory,
      gold_rul_test(rul_at_end, static_cast<int>(trajectory.length()), cap),
      cap);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_by_engine: fraction must be in (0,1)");
  }
  if (n < 2) {
    throw std::invalid_argument("split_by_engine: need at least 2 engines");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  auto train_count = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  // Keep both sides non-empty when rounding lands on 0 or N.
  train_count = std::clamp<std::size_t>(train_count, 1, n - 1);

  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split;
  split.first.assign(order.begin(), order.begin() + train_count);
  split.second.assign(order.begin() + train_count, order.end());
  return split;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_by_engine(
    std::span<const Trajectory> trajectories, double train_fraction,
    std::uint64_t seed) {
  const auto [train_idx, val_idx] =
      split_indices(trajectories.size(), train_fraction, seed);
  std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split;
  for (std::size_t i : train_idx) {
    split.first.push_back(trajectories[i]);
  }
  for (std::size_t i : val_idx) {
    split.second.push_back(trajectories[i]);
  }
  return split;
}

}  // namespace rul
