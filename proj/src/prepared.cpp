#include "rul/prepared.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rul {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("prepared dataset: cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("prepared dataset: cannot write " + path.string());
  }
  out << text;
}

std::string format_labeled(const std::vector<LabeledTrajectory>& trajectories) {
  std::string out;
  char buf[32];
  for (const auto& labeled : trajectories) {
    const auto& traj = labeled.trajectory;
    for (std::size_t t = 0; t < traj.length(); ++t) {
      out += std::to_string(traj.unit_id);
      out += ' ';
      out += std::to_string(t + 1);
      for (double v : traj.features.row(t)) {
        std::snprintf(buf, sizeof(buf), " %.17g", v);
        out += buf;
      }
      out += ' ';
      out += std::to_string(labeled.gold_rul[t]);
      std::snprintf(buf, sizeof(buf), " %.17g", labeled.target[t]);
      out += buf;
      out += '\n';
    }
  }
  return out;
}

std::vector<LabeledTrajectory> parse_labeled(std::string_view text, int cap,
                                             const std::string& what) {
  std::vector<LabeledTrajectory> result;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  int current_unit = -1;
  std::vector<std::array<double, kFeatureCount>> frames;
  std::vector<int> gold;

  const auto flush = [&](int unit) {
    if (frames.empty()) {
      return;
    }
    LabeledTrajectory labeled;
    labeled.trajectory.unit_id = unit;
    labeled.trajectory.features = Matrix(frames.size(), kFeatureCount);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      std::copy(frames[t].begin(), frames[t].end(),
                labeled.trajectory.features.row(t).begin());
    }
    labeled.gold_rul = gold;
    labeled.target.resize(gold.size());
    for (std::size_t t = 0; t < gold.size(); ++t) {
      labeled.target[t] =
          static_cast<double>(gold[t]) / static_cast<double>(cap);
    }
    result.push_back(std::move(labeled));
    frames.clear();
    gold.clear();
  };

  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty()) {
      continue;
    }
    std::array<double, kFeatureCount + 4> fields{};
    std::size_t count = 0;
    std::size_t fpos = 0;
    while (fpos < line.size() && count < fields.size()) {
      while (fpos < line.size() && line[fpos] == ' ') {
        ++fpos;
      }
      const std::size_t start = fpos;
      while (fpos < line.size() && line[fpos] != ' ') {
        ++fpos;
      }
      if (fpos > start) {
        const auto token = line.substr(start, fpos - start);
        const auto [p, ec] = std::from_chars(
            token.data(), token.data() + token.size(), fields[count]);
        if (ec != std::errc{} || p != token.data() + token.size()) {
          throw std::runtime_error(what + " line " + std::to_string(line_no) +
                                   ": bad field '" + std::string(token) + "'");
        }
        ++count;
      }
    }
    if (count != kFeatureCount + 4) {
      throw std::runtime_error(what + " line " + std::to_string(line_no) +
                               ": expected " +
                               std::to_string(kFeatureCount + 4) + " fields");
    }
    const int unit = static_cast<int>(fields[0]);
    const int cycle = static_cast<int>(fields[1]);
    if (unit != current_unit) {
      flush(current_unit);
      current_unit = unit;
    }
    if (cycle != static_cast<int>(frames.size()) + 1) {
      throw std::runtime_error(what + " line " + std::to_string(line_no) +
                               ": cycles out of order for unit " +
                               std::to_string(unit));
    }
    std::array<double, kFeatureCount> frame;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      frame[i] = fields[i + 2];
    }
    frames.push_back(frame);
    gold.push_back(static_cast<int>(fields[kFeatureCount + 2]));
  }
  flush(current_unit);
  return result;
}

}  // namespace

PreparedDataset prepare_dataset(const DatasetBundle& bundle, int cap) {
  if (bundle.test.size() != bundle.test_rul.size()) {
    throw std::invalid_argument("prepare: test/RUL count mismatch");
  }
  PreparedDataset data;
  data.dataset = bundle.name;
  data.cap = cap;
  data.stats = fit_normalizer(bundle.train);
  data.train.reserve(bundle.train.size());
  for (const auto& traj : bundle.train) {
    data.train.push_back(label_train_trajectory(data.stats, traj, cap));
  }
  data.test.reserve(bundle.test.size());
  for (std::size_t i = 0; i < bundle.test.size(); ++i) {
    data.test.push_back(label_test_trajectory(data.stats, bundle.test[i],
                                              bundle.test_rul[i], cap));
    data.test.back().trajectory.true_rul_at_end = bundle.test_rul[i];
  }
  data.test_rul = bundle.test_rul;
  return data;
}

void relabel(PreparedDataset& data, int cap) {
  if (cap == data.cap) {
    return;
  }
  for (auto& labeled : data.train) {
    const int length = static_cast<int>(labeled.trajectory.length());
    labeled.gold_rul = gold_rul_train(length, cap);
    labeled.target.resize(labeled.gold_rul.size());
    for (std::size_t t = 0; t < labeled.gold_rul.size(); ++t) {
      labeled.target[t] = static_cast<double>(labeled.gold_rul[t]) /
                          static_cast<double>(cap);
    }
  }
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    auto& labeled = data.test[i];
    const int length = static_cast<int>(labeled.trajectory.length());
    labeled.gold_rul = gold_rul_test(data.test_rul[i], length, cap);
    labeled.target.resize(labeled.gold_rul.size());
    for (std::size_t t = 0; t < labeled.gold_rul.size(); ++t) {
      labeled.target[t] = static_cast<double>(labeled.gold_rul[t]) /
                          static_cast<double>(cap);
    }
  }
  data.cap = cap;
}

void write_prepared(const PreparedDataset& data,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json meta;
  meta["dataset"] = data.dataset;
  meta["cap"] = data.cap;
  meta["train_count"] = data.train.size();
  meta["test_count"] = data.test.size();
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  write_text(dir / "stats.json", data.stats.to_json() + "\n");
  write_text(dir / "train_labeled.txt", format_labeled(data.train));
  write_text(dir / "test_labeled.txt", format_labeled(data.test));

  std::string rul_text;
  for (int v : data.test_rul) {
    rul_text += std::to_string(v);
    rul_text += '\n';
  }
  write_text(dir / "test_rul.txt", rul_text);
}

PreparedDataset read_prepared(const std::filesystem::path& dir) {
  PreparedDataset data;
  const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  data.dataset = meta.at("dataset").get<std::string>();
  data.cap = meta.at("cap").get<int>();
  data.stats = NormalizationStats::from_json(read_text(dir / "stats.json"));
  data.train =
      parse_labeled(read_text(dir / "train_labeled.txt"), data.cap, "train");
  data.test =
      parse_labeled(read_text(dir / "test_labeled.txt"), data.cap, "test");
  data.test_rul = parse_rul_file(read_text(dir / "test_rul.txt"));
  if (data.train.size() != meta.at("train_count").get<std::size_t>() ||
      data.test.size() != meta.at("test_count").get<std::size_t>()) {
    throw std::runtime_error("prepared dataset: counts do not match meta.json");
  }
  if (data.test_rul.size() != data.test.size()) {
    throw std::runtime_error("prepared dataset: test_rul count mismatch");
  }
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    data.test[i].trajectory.true_rul_at_end = data.test_rul[i];
  }
  return data;
}

}  // namespace rul
