#include "rul/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace rul {
namespace {

constexpr char kMagic[4] = {'R', 'U', 'L', 'M'};

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | p[i];
  }
  return v;
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | p[i];
  }
  return v;
}

void read_exact(std::istream& in, void* buf, std::size_t n,
                const char* what) {
  in.read(static_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  }
}

nlohmann::json architecture_to_json(const ModelArchitecture& arch) {
  nlohmann::json j;
  j["input_dim"] = arch.input_dim;
  j["feature_mlp_dims"] = arch.feature_mlp_dims;
  j["lstm_cells"] = arch.lstm_cells;
  j["regression_mlp_dims"] = arch.regression_mlp_dims;
  j["dropout"] = arch.dropout;
  j["ablate_feature_mlp"] = arch.ablate_feature_mlp;
  return j;
}

ModelArchitecture architecture_from_json(const nlohmann::json& j) {
  ModelArchitecture arch;
  arch.input_dim = j.at("input_dim").get<std::size_t>();
  arch.feature_mlp_dims =
      j.at("feature_mlp_dims").get<std::vector<std::size_t>>();
  arch.lstm_cells = j.at("lstm_cells").get<std::size_t>();
  arch.regression_mlp_dims =
      j.at("regression_mlp_dims").get<std::vector<std::size_t>>();
  arch.dropout = j.at("dropout").get<double>();
  arch.ablate_feature_mlp = j.at("ablate_feature_mlp").get<bool>();
  arch.validate();
  return arch;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, std::ostream& out) {
  struct Entry {
    std::string name;
    const double* data;
    std::size_t rows, cols;
  };
  std::vector<Entry> entries;
  checkpoint.params.for_each_tensor(
      [&](const std::string& name, const double* data, std::size_t rows,
          std::size_t cols) { entries.push_back({name, data, rows, cols}); });

  nlohmann::json header;
  header["architecture"] = architecture_to_json(checkpoint.params.arch);
  header["normalization"] = {
      {"min", checkpoint.normalization.per_feature_min},
      {"max", checkpoint.normalization.per_feature_max},
  };
  header["train_config_digest"] = checkpoint.train_config_digest;
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    dir.push_back({{"name", e.name},
                   {"dims", {e.rows, e.cols}},
                   {"offset", offset}});
    offset += e.rows * e.cols * sizeof(double);
  }
  header["tensors"] = dir;
  const std::string header_text = header.dump();

  std::string prefix;
  prefix.append(kMagic, sizeof(kMagic));
  put_u32_le(prefix, checkpoint.format_version);
  put_u64_le(prefix, header_text.size());
  out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));

  std::string payload;
  for (const auto& e : entries) {
    payload.clear();
    payload.reserve(e.rows * e.cols * sizeof(double));
    for (std::size_t i = 0; i < e.rows * e.cols; ++i) {
      put_u64_le(payload, std::bit_cast<std::uint64_t>(e.data[i]));
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) {
    throw std::runtime_error("checkpoint: write failed");
  }
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  }
  save_checkpoint(checkpoint, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  unsigned char fixed[16];
  read_exact(in, fixed, sizeof(fixed), "header");
  if (std::memcmp(fixed, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint (bad magic)");
  }
  const std::uint32_t version = get_u32_le(fixed + 4);
  if (version > kCheckpointVersion) {
    throw std::runtime_error(
        "unsupported checkpoint version " + std::to_string(version) +
        " (supported up to " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = get_u64_le(fixed + 8);
  std::string header_text(header_len, '\0');
  read_exact(in, header_text.data(), header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad header JSON: ") +
                             e.what());
  }

  Checkpoint checkpoint;
  checkpoint.format_version = version;
  checkpoint.params =
      zero_params_like(architecture_from_json(header.at("architecture")));
  checkpoint.normalization.per_feature_min =
      header.at("normalization").at("min").get<std::vector<double>>();
  checkpoint.normalization.per_feature_max =
      header.at("normalization").at("max").get<std::vector<double>>();
  checkpoint.train_config_digest =
      header.at("train_config_digest").get<std::string>();

  struct Slot {
    double* data;
    std::size_t rows, cols;
    bool seen = false;
  };
  std::map<std::string, Slot> slots;
  checkpoint.params.for_each_tensor(
      [&](const std::string& name, double* data, std::size_t rows,
          std::size_t cols) { slots[name] = {data, rows, cols, false}; });

  std::vector<unsigned char> buf;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto it = slots.find(name);
    if (it == slots.end()) {
      throw std::runtime_error("checkpoint: unknown tensor name '" + name +
                               "'");
    }
    Slot& slot = it->second;
    if (slot.seen) {
      throw std::runtime_error("checkpoint: duplicate tensor '" + name + "'");
    }
    const auto dims = entry.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 2 || dims[0] != slot.rows || dims[1] != slot.cols) {
      throw std::runtime_error(
          "checkpoint: shape mismatch for '" + name + "': expected " +
          std::to_string(slot.rows) + "x" + std::to_string(slot.cols));
    }
    const std::size_t count = slot.rows * slot.cols;
    buf.resize(count * sizeof(double));
    read_exact(in, buf.data(), buf.size(), "payload");
    for (std::size_t i = 0; i < count; ++i) {
      slot.data[i] =
          std::bit_cast<double>(get_u64_le(buf.data() + i * sizeof(double)));
    }
    slot.seen = true;
  }
  for (const auto& [name, slot] : slots) {
    if (!slot.seen) {
      throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    }
  }
  return checkpoint;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  }
  return load_checkpoint(in);
}

}  // namespace rul
