#include "rul/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rul {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view value, const std::string& key,
                    std::vector<std::string>& errors) {
  double v = 0.0;
  const auto [p, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || p != value.data() + value.size()) {
    errors.push_back(key + " (not a number: '" + std::string(value) + "')");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view value, const std::string& key,
                         std::vector<std::string>& errors) {
  std::uint64_t v = 0;
  const auto [p, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || p != value.data() + value.size()) {
    errors.push_back(key + " (not a nonnegative integer: '" +
                     std::string(value) + "')");
  }
  return v;
}

bool parse_bool(std::string_view value, const std::string& key,
                std::vector<std::string>& errors) {
  if (value == "true" || value == "1") {
    return true;
  }
  if (value == "false" || value == "0") {
    return false;
  }
  errors.push_back(key + " (not a boolean: '" + std::string(value) + "')");
  return false;
}

}  // namespace

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig config;
  std::vector<std::string> unknown;
  std::vector<std::string> bad_values;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));

    if (key == "learning_rate") {
      config.learning_rate = parse_number(value, key, bad_values);
    } else if (key == "batch_size") {
      config.batch_size =
          static_cast<std::size_t>(parse_uint(value, key, bad_values));
    } else if (key == "cap") {
      config.cap = static_cast<int>(parse_uint(value, key, bad_values));
    } else if (key == "train_fraction") {
      config.train_fraction = parse_number(value, key, bad_values);
    } else if (key == "max_epochs") {
      config.max_epochs =
          static_cast<std::size_t>(parse_uint(value, key, bad_values));
    } else if (key == "patience") {
      config.patience =
          static_cast<std::size_t>(parse_uint(value, key, bad_values));
    } else if (key == "grad_clip") {
      if (value == "none") {
        config.grad_clip.reset();
      } else {
        config.grad_clip = parse_number(value, key, bad_values);
      }
    } else if (key == "seed") {
      config.seed = parse_uint(value, key, bad_values);
    } else if (key == "ablate") {
      config.arch.ablate_feature_mlp = parse_bool(value, key, bad_values);
    } else if (key == "dropout") {
      config.arch.dropout = parse_number(value, key, bad_values);
    } else {
      unknown.push_back(key);
    }
  }

  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) {
      msg += " " + k;
    }
    throw std::runtime_error(msg);
  }
  if (!bad_values.empty()) {
    std::string msg = "invalid config values:";
    for (const auto& k : bad_values) {
      msg += " " + k;
    }
    throw std::runtime_error(msg);
  }
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_train_config(buffer.str());
}

std::string canonical_config(const TrainConfig& config) {
  char buf[64];
  std::string out;
  const auto add_num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    out += buf;
  };
  const auto add_int = [&](const char* key, unsigned long long v) {
    std::snprintf(buf, sizeof(buf), "%s = %llu\n", key, v);
    out += buf;
  };
  out += std::string("ablate = ") +
         (config.arch.ablate_feature_mlp ? "true" : "false") + "\n";
  add_int("batch_size", config.batch_size);
  add_int("cap", static_cast<unsigned long long>(config.cap));
  add_num("dropout", config.arch.dropout);
  if (config.grad_clip) {
    add_num("grad_clip", *config.grad_clip);
  } else {
    out += "grad_clip = none\n";
  }
  add_num("learning_rate", config.learning_rate);
  add_int("max_epochs", config.max_epochs);
  add_int("patience", config.patience);
  add_int("seed", config.seed);
  add_num("train_fraction", config.train_fraction);
  return out;
}

std::string config_digest(const TrainConfig& config) {
  return fnv1a_hex(canonical_config(config));
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace rul
