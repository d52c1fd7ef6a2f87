#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rul/cmapss.hpp"
#include "rul/labeling.hpp"

namespace rul {

// A dataset after normalization and labeling, as written by `prepare` and
// consumed by train/experiment/eval. Statistics are fitted on the full train
// split; targets are regenerable for a different cap without the raw files.
struct PreparedDataset {
  std::string dataset;
  int cap = 130;
  NormalizationStats stats;
  std::vector<LabeledTrajectory> train;
  std::vector<LabeledTrajectory> test;
  std::vector<int> test_rul;
};

PreparedDataset prepare_dataset(const DatasetBundle& bundle, int cap);

// Regenerates gold/target columns for a new cap (features are unaffected).
void relabel(PreparedDataset& data, int cap);

// Directory layout: meta.json, stats.json, train_labeled.txt,
// test_labeled.txt, test_rul.txt. Labeled lines are
// "unit cycle f1..f24 gold target" with full-precision features.
void write_prepared(const PreparedDataset& data,
                    const std::filesystem::path& dir);
PreparedDataset read_prepared(const std::filesystem::path& dir);

}  // namespace rul
