#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rul/matrix.hpp"

namespace rul {

// Column layout of the published text files: unit, cycle, 3 operational
// settings, 21 sensors. The 24 non-index columns are the model inputs.
inline constexpr std::size_t kFeatureCount = 24;
inline constexpr std::size_t kFieldsPerLine = kFeatureCount + 2;

// One engine's run. Training runs end at failure (true_rul_at_end absent);
// test runs are truncated and carry the ground-truth RUL at the last cycle.
struct Trajectory {
  int unit_id = 0;
  Matrix features;  // length x 24, cycle t at row t-1
  std::optional<int> true_rul_at_end;

  std::size_t length() const { return features.rows(); }
};

struct DatasetBundle {
  std::string name;  // FD001..FD004 or SYNTH
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  std::vector<int> test_rul;  // aligned with test
};

// Parses a train/test file. Lines hold 26 whitespace-separated decimal
// fields; trajectories come back sorted by unit id with cycles 1..T verified
// consecutive. Errors carry 1-based line numbers.
std::vector<Trajectory> parse_trajectory_file(std::string_view text);

// Parses a RUL ground-truth file (one nonnegative integer per line).
std::vector<int> parse_rul_file(std::string_view text);

// Inverse of parse_trajectory_file at value level (%.17g fields).
std::string format_trajectory_file(const std::vector<Trajectory>& trajectories);

// Loads train_<id>.txt, test_<id>.txt, RUL_<id>.txt from a data root.
DatasetBundle load_cmapss(const std::filesystem::path& data_root,
                          const std::string& dataset_id);

struct SyntheticSpec {
  int num_train = 10;
  int num_test = 10;
  int min_len = 120;
  int max_len = 150;
  int num_conditions = 1;
  std::uint64_t seed = 0;
};

// Deterministic fixture bundle. Each unit carries a hidden degradation index
// (capped remaining life, like the training targets) mixed through
// per-condition affine maps plus bounded noise; the 3 setting columns encode
// the active condition. Test runs are truncated with matching test_rul.
DatasetBundle generate_synthetic(const SyntheticSpec& spec);

struct LengthSummary {
  std::size_t count = 0;
  std::size_t min_len = 0;
  std::size_t max_len = 0;
  double mean_len = 0.0;
};

LengthSummary summarize_lengths(const std::vector<Trajectory>& trajectories);

}  // namespace rul
