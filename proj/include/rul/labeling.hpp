#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rul/cmapss.hpp"

namespace rul {

// Per-feature min/max over a fitting set (the denominators of the [0,1]
// normalization). Immutable after fitting.
struct NormalizationStats {
  std::vector<double> per_feature_min;
  std::vector<double> per_feature_max;

  std::size_t dim() const { return per_feature_min.size(); }
  bool operator==(const NormalizationStats&) const = default;

  std::string to_json() const;
  static NormalizationStats from_json(const std::string& text);
};

NormalizationStats fit_normalizer(std::span<const Trajectory> trajectories);

// x = (v - min) / (max - min); constant features map to 0.0 everywhere so the
// input dimension stays fixed.
Trajectory apply_normalizer(const NormalizationStats& stats,
                            const Trajectory& trajectory);

// Piece-wise linear target for a run-to-failure trajectory: RUL capped early
// in life, then a unit-step ramp down to 0 at the final cycle.
std::vector<int> gold_rul_train(int length, int cap);

// Same labeling extended to a truncated run with known RUL at its last cycle.
std::vector<int> gold_rul_test(int rul_at_end, int length, int cap);

struct LabeledTrajectory {
  Trajectory trajectory;       // features normalized to [0,1]
  std::vector<int> gold_rul;   // per cycle, capped
  std::vector<double> target;  // gold_rul / cap, exactly
};

LabeledTrajectory label_train_trajectory(const NormalizationStats& stats,
                                         const Trajectory& trajectory,
                                         int cap);
LabeledTrajectory label_test_trajectory(const NormalizationStats& stats,
                                        const Trajectory& trajectory,
                                        int rul_at_end, int cap);

// Deterministic engine-level split: shuffles indices 0..n-1 and assigns the
// first round(train_fraction * n) to the train side (clamped so neither side
// is empty).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

// Partition whole trajectories by shuffled unit id via split_indices.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_by_engine(
    std::span<const Trajectory> trajectories, double train_fraction,
    std::uint64_t seed);

}  // namespace rul
