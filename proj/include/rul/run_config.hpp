#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rul/training.hpp"

namespace rul {

// Flat "key = value" config files with '#' comments. Unknown keys are hard
// errors. Keys: learning_rate, batch_size, cap, train_fraction, max_epochs,
// patience, grad_clip (number or "none"), seed, ablate, dropout.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);

// Canonical serialization (sorted keys, full precision) and its FNV-1a hash;
// the digest identifies a run in manifests and checkpoints.
std::string canonical_config(const TrainConfig& config);
std::string config_digest(const TrainConfig& config);

std::string fnv1a_hex(std::string_view text);

}  // namespace rul
