#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "rul/labeling.hpp"
#include "rul/network.hpp"

namespace rul {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk model snapshot. Normalization statistics travel with the weights so
// evaluation never recomputes them from the wrong split.
//
// Layout: magic "RULM" | u32 version | u64 header length | UTF-8 JSON header
// (architecture, normalization, config digest, tensor directory with name,
// dims and payload offset) | tensor payloads as little-endian f64, row-major,
// in directory order.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  ModelParams params;
  NormalizationStats normalization;
  std::string train_config_digest;
};

void save_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rul
