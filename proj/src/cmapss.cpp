#include "rul/cmapss.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rul/rng.hpp"

namespace rul {
namespace {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(std::size_t line_no, const std::string& message) {
  throw ParseError("line " + std::to_string(line_no) + ": " + message);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) {
      ++pos;
    }
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') {
      ++pos;
    }
    if (pos > start) {
      fields.push_back(line.substr(start, pos - start));
    }
  }
  return fields;
}

double parse_double(std::string_view token, std::size_t line_no,
                    std::size_t field_index) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    fail(line_no, "field " + std::to_string(field_index + 1) +
                      " is not numeric: '" + std::string(token) + "'");
  }
  return value;
}

int parse_int(std::string_view token, std::size_t line_no,
              std::size_t field_index) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    fail(line_no, "field " + std::to_string(field_index + 1) +
                      " is not an integer: '" + std::string(token) + "'");
  }
  return value;
}

// Iterates lines accepting LF or CRLF, tracking 1-based line numbers.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    if (pos == text.size()) {
      break;
    }
    std::size_t end = text.find('\n', pos);
    std::string_view line;
    if (end == std::string_view::npos) {
      line = text.substr(pos);
      pos = text.size();
    } else {
      line = text.substr(pos, end - pos);
      pos = end + 1;
    }
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    ++line_no;
    fn(line, line_no);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

}  // namespace

std::vector<Trajectory> parse_trajectory_file(std::string_view text) {
  struct Record {
    int cycle;
    std::size_t line_no;
    std::array<double, kFeatureCount> features;
  };
  std::map<int, std::vector<Record>> by_unit;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto fields = split_fields(line);
    if (fields.empty()) {
      return;  // blank line
    }
    if (fields.size() != kFieldsPerLine) {
      fail(line_no, "expected " + std::to_string(kFieldsPerLine) +
                        " fields, found " + std::to_string(fields.size()));
    }
    const int unit = parse_int(fields[0], line_no, 0);
    const int cycle = parse_int(fields[1], line_no, 1);
    if (unit < 1) {
      fail(line_no, "unit id must be positive, found " + std::to_string(unit));
    }
    if (cycle < 1) {
      fail(line_no, "cycle must be positive, found " + std::to_string(cycle));
    }
    Record rec{cycle, line_no, {}};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      rec.features[i] = parse_double(fields[i + 2], line_no, i + 2);
    }
    by_unit[unit].push_back(rec);
  });

  std::vector<Trajectory> result;
  result.reserve(by_unit.size());
  for (auto& [unit, records] : by_unit) {
    std::stable_sort(records.begin(), records.end(),
                     [](const Record& a, const Record& b) {
                       return a.cycle < b.cycle;
                     });
    for (std::size_t i = 0; i < records.size(); ++i) {
      const int expected = static_cast<int>(i) + 1;
      if (records[i].cycle == expected) {
        continue;
      }
      if (i > 0 && records[i].cycle == records[i - 1].cycle) {
        fail(records[i].line_no,
             "duplicate cycle " + std::to_string(records[i].cycle) +
                 " for unit " + std::to_string(unit));
      }
      fail(records[i].line_no,
           "non-consecutive cycles for unit " + std::to_string(unit) +
               ": expected " + std::to_string(expected) + ", found " +
               std::to_string(records[i].cycle));
    }
    Trajectory traj;
    traj.unit_id = unit;
    traj.features = Matrix(records.size(), kFeatureCount);
    for (std::size_t t = 0; t < records.size(); ++t) {
      std::copy(records[t].features.begin(), records[t].features.end(),
                traj.features.row(t).begin());
    }
    result.push_back(std::move(traj));
  }
  return result;
}

std::vector<int> parse_rul_file(std::string_view text) {
  std::vector<int> values;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto fields = split_fields(line);
    if (fields.empty()) {
      return;
    }
    if (fields.size() != 1) {
      fail(line_no, "expected a single integer, found " +
                        std::to_string(fields.size()) + " fields");
    }
    const int value = parse_int(fields[0], line_no, 0);
    if (value < 0) {
      fail(line_no, "RUL must be nonnegative, found " + std::to_string(value));
    }
    values.push_back(value);
  });
  return values;
}

std::string format_trajectory_file(
    const std::vector<Trajectory>& trajectories) {
  std::string out;
  char buf[32];
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t < traj.length(); ++t) {
      out += std::to_string(traj.unit_id);
      out += ' ';
      out += std::to_string(t + 1);
      for (double v : traj.features.row(t)) {
        std::snprintf(buf, sizeof(buf), " %.17g", v);
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

DatasetBundle load_cmapss(const std::filesystem::path& data_root,
                          const std::string& dataset_id) {
  const auto train_path = data_root / ("train_" + dataset_id + ".txt");
  const auto test_path = data_root / ("test_" + dataset_id + ".txt");
  const auto rul_path = data_root / ("RUL_" + dataset_id + ".txt");
  for (const auto& path : {train_path, test_path, rul_path}) {
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("missing dataset file: " + path.string());
    }
  }
  DatasetBundle bundle;
  bundle.name = dataset_id;
  bundle.train = parse_trajectory_file(read_file(train_path));
  bundle.test = parse_trajectory_file(read_file(test_path));
  bundle.test_rul = parse_rul_file(read_file(rul_path));
  if (bundle.test_rul.size() != bundle.test.size()) {
    throw std::runtime_error(
        "RUL count (" + std::to_string(bundle.test_rul.size()) +
        ") does not match test trajectory count (" +
        std::to_string(bundle.test.size()) + ") for " + dataset_id);
  }
  for (std::size_t i = 0; i < bundle.test.size(); ++i) {
    bundle.test[i].true_rul_at_end = bundle.test_rul[i];
  }
  return bundle;
}

namespace {

// Hidden degradation index: capped remaining life, scaled to [0, 1]. Matches
// the plateau-then-ramp structure of the training targets so a linear probe
// on the features can recover RUL.
constexpr double kHealthyPlateau = 130.0;

struct SensorModel {
  std::array<double, 3> condition_settings[8];  // up to 8 conditions
  struct Channel {
    double offset;
    std::array<double, 3> condition_weight;
    double degradation_gain;
  };
  std::array<Channel, 21> channels;
  double noise = 0.01;
};

SensorModel draw_sensor_model(Rng& rng, int num_conditions) {
  SensorModel model;
  for (int c = 0; c < num_conditions; ++c) {
    for (auto& s : model.condition_settings[c]) {
      s = rng.uniform(0.0, 42.0);
    }
  }
  for (auto& ch : model.channels) {
    ch.offset = rng.uniform(-1.0, 1.0);
    for (auto& w : ch.condition_weight) {
      w = rng.uniform(-0.05, 0.05);
    }
    const double magnitude = rng.uniform(0.6, 1.4);
    ch.degradation_gain = (rng.below(2) == 0) ? magnitude : -magnitude;
  }
  return model;
}

Matrix synth_frames(Rng& rng, const SensorModel& model, int length,
                    int num_conditions) {
  Matrix features(length, kFeatureCount);
  for (int t = 1; t <= length; ++t) {
    const int cond =
        num_conditions == 1 ? 0 : static_cast<int>(rng.below(num_conditions));
    const auto& settings = model.condition_settings[cond];
    const double remaining = static_cast<double>(length - t);
    const double eta = std::min(remaining, kHealthyPlateau) / kHealthyPlateau;
    auto row = features.row(t - 1);
    row[0] = settings[0];
    row[1] = settings[1];
    row[2] = settings[2];
    for (std::size_t i = 0; i < model.channels.size(); ++i) {
      const auto& ch = model.channels[i];
      double v = ch.offset + ch.degradation_gain * eta;
      for (int k = 0; k < 3; ++k) {
        v += ch.condition_weight[k] * settings[k];
      }
      v += model.noise * rng.uniform(-1.0, 1.0);
      row[3 + i] = v;
    }
  }
  return features;
}

}  // namespace

DatasetBundle generate_synthetic(const SyntheticSpec& spec) {
  if (spec.min_len <= 0 || spec.min_len > spec.max_len) {
    throw std::invalid_argument("synthetic: need 0 < min_len <= max_len");
  }
  if (spec.num_conditions < 1 || spec.num_conditions > 8) {
    throw std::invalid_argument("synthetic: num_conditions must be in [1, 8]");
  }
  if (spec.num_train < 0 || spec.num_test < 0) {
    throw std::invalid_argument("synthetic: counts must be nonnegative");
  }
  Rng rng(spec.seed);
  const SensorModel model = draw_sensor_model(rng, spec.num_conditions);

  DatasetBundle bundle;
  bundle.name = "SYNTH";
  const int span = spec.max_len - spec.min_len + 1;
  for (int u = 1; u <= spec.num_train; ++u) {
    const int length = spec.min_len + static_cast<int>(rng.below(span));
    Trajectory traj;
    traj.unit_id = u;
    traj.features = synth_frames(rng, model, length, spec.num_conditions);
    bundle.train.push_back(std::move(traj));
  }
  for (int u = 1; u <= spec.num_test; ++u) {
    const int length = spec.min_len + static_cast<int>(rng.below(span));
    Matrix full = synth_frames(rng, model, length, spec.num_conditions);
    // Truncate in the second half of life so some targets sit below the cap.
    const int lo = std::max(1, length / 2);
    const int kept =
        length <= lo ? length
                     : lo + static_cast<int>(rng.below(length - lo));
    Trajectory traj;
    traj.unit_id = u;
    traj.features = Matrix(kept, kFeatureCount);
    for (int t = 0; t < kept; ++t) {
      std::copy(full.row(t).begin(), full.row(t).end(),
                traj.features.row(t).begin());
    }
    traj.true_rul_at_end = length - kept;
    bundle.test_rul.push_back(length - kept);
    bundle.test.push_back(std::move(traj));
  }
  return bundle;
}

LengthSummary summarize_lengths(const std::vector<Trajectory>& trajectories) {
  LengthSummary s;
  s.count = trajectories.size();
  if (trajectories.empty()) {
    return s;
  }
  s.min_len = trajectories.front().length();
  s.max_len = trajectories.front().length();
  double total = 0.0;
  for (const auto& traj : trajectories) {
    s.min_len = std::min(s.min_len, traj.length());
    s.max_len = std::max(s.max_len, traj.length());
    total += static_cast<double>(traj.length());
  }
  s.mean_len = total / static_cast<double>(s.count);
  return s;
}

}  // namespace rul
