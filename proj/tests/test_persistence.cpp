#include <doctest.h>

#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rul/checkpoint.hpp"
#include "rul/cmapss.hpp"
#include "rul/evaluation.hpp"
#include "rul/prepared.hpp"

using namespace rul;

namespace {

Checkpoint sample_checkpoint(bool ablated = false, std::uint64_t seed = 21) {
  ModelArchitecture arch;
  arch.ablate_feature_mlp = ablated;
  Rng rng(seed);
  Checkpoint c;
  c.params = init_params(arch, rng);
  c.normalization.per_feature_min.assign(kFeatureCount, -1.25);
  c.normalization.per_feature_max.assign(kFeatureCount, 3.5);
  c.normalization.per_feature_min[3] = 0.125;
  c.train_config_digest = "0123456789abcdef";
  return c;
}

std::string to_bytes(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(c, out);
  return out.str();
}

bool params_bit_equal(const ModelParams& a, const ModelParams& b) {
  bool equal = true;
  std::vector<std::pair<const double*, std::size_t>> ta, tb;
  a.for_each_tensor([&](const std::string&, const double* d, std::size_t r,
                        std::size_t c) { ta.emplace_back(d, r * c); });
  b.for_each_tensor([&](const std::string&, const double* d, std::size_t r,
                        std::size_t c) { tb.emplace_back(d, r * c); });
  if (ta.size() != tb.size()) {
    return false;
  }
  for (std::size_t i = 0; i < ta.size() && equal; ++i) {
    equal = ta[i].second == tb[i].second &&
            std::memcmp(ta[i].first, tb[i].first,
                        ta[i].second * sizeof(double)) == 0;
  }
  return equal;
}

}  // namespace

TEST_SUITE("persistence") {

TEST_CASE("round-trip reproduces every tensor bit-for-bit") {
  const Checkpoint original = sample_checkpoint();
  const std::string bytes = to_bytes(original);
  std::istringstream in(bytes, std::ios::binary);
  const Checkpoint loaded = load_checkpoint(in);
  CHECK(loaded.format_version == kCheckpointVersion);
  CHECK(loaded.params.arch == original.params.arch);
  CHECK(params_bit_equal(loaded.params, original.params));
  CHECK(loaded.normalization == original.normalization);
  CHECK(loaded.train_config_digest == original.train_config_digest);
}

TEST_CASE("ablated checkpoints carry no feature tensors") {
  const Checkpoint original = sample_checkpoint(true);
  const std::string bytes = to_bytes(original);
  CHECK(bytes.find("fmlp") == std::string::npos);
  std::istringstream in(bytes, std::ios::binary);
  const Checkpoint loaded = load_checkpoint(in);
  CHECK(loaded.params.arch.ablate_feature_mlp);
  CHECK(loaded.params.feature_mlp.empty());
  CHECK(params_bit_equal(loaded.params, original.params));
}

TEST_CASE("corrupted magic is rejected") {
  std::string bytes = to_bytes(sample_checkpoint());
  bytes[0] = 'X';
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_WITH_AS(load_checkpoint(in), "not a checkpoint (bad magic)",
                       std::runtime_error);
}

TEST_CASE("future versions are rejected explicitly") {
  std::string bytes = to_bytes(sample_checkpoint());
  bytes[4] = 99;  // version field, little-endian
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_WITH_AS(
      load_checkpoint(in),
      "unsupported checkpoint version 99 (supported up to 1)",
      std::runtime_error);
}

TEST_CASE("truncated payload is reported") {
  const std::string bytes = to_bytes(sample_checkpoint());
  std::istringstream in(bytes.substr(0, bytes.size() - 128),
                        std::ios::binary);
  CHECK_THROWS_WITH_AS(load_checkpoint(in), "checkpoint: truncated payload",
                       std::runtime_error);
}

TEST_CASE("unknown tensor names are rejected") {
  std::string bytes = to_bytes(sample_checkpoint());
  const auto pos = bytes.find("lstm.Wx.i");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 9, "lstm.Wx.q");
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_WITH_AS(load_checkpoint(in),
                       "checkpoint: unknown tensor name 'lstm.Wx.q'",
                       std::runtime_error);
}

TEST_CASE("shape mismatches are rejected") {
  std::string bytes = to_bytes(sample_checkpoint());
  const auto pos = bytes.find("[100,24]");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 8, "[100,25]");
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_AS(load_checkpoint(in), std::runtime_error);
}

TEST_CASE("file round-trip via the filesystem") {
  const auto dir = std::filesystem::temp_directory_path() / "rul_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.rulm";
  const Checkpoint original = sample_checkpoint(false, 77);
  save_checkpoint(original, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(params_bit_equal(loaded.params, original.params));
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluating a loaded model matches the in-memory original exactly") {
  SyntheticSpec spec;
  spec.num_train = 4;
  spec.num_test = 4;
  spec.min_len = 15;
  spec.max_len = 25;
  spec.seed = 4;
  const auto bundle = generate_synthetic(spec);
  const auto data = prepare_dataset(bundle, 130);

  ModelArchitecture arch;
  Rng rng(3);
  Checkpoint c;
  c.params = init_params(arch, rng);
  c.normalization = data.stats;
  c.train_config_digest = "f00f";

  const auto before =
      evaluate_last_cycle_labeled(c.params, data.test, data.test_rul, 130);
  const std::string bytes = to_bytes(c);
  std::istringstream in(bytes, std::ios::binary);
  const Checkpoint loaded = load_checkpoint(in);
  const auto after = evaluate_last_cycle_labeled(loaded.params, data.test,
                                                 data.test_rul, 130);
  CHECK(before.rmse == after.rmse);
  CHECK(before.score == after.score);
  CHECK(before.residuals == after.residuals);
}

TEST_CASE("prepared dataset round-trip preserves the labeled data") {
  SyntheticSpec spec;
  spec.num_train = 3;
  spec.num_test = 2;
  spec.min_len = 8;
  spec.max_len = 12;
  spec.seed = 6;
  const auto data = prepare_dataset(generate_synthetic(spec), 130);
  const auto dir =
      std::filesystem::temp_directory_path() / "rul_prepared_test";
  write_prepared(data, dir);
  const auto loaded = read_prepared(dir);
  CHECK(loaded.dataset == data.dataset);
  CHECK(loaded.cap == data.cap);
  CHECK(loaded.stats == data.stats);
  REQUIRE(loaded.train.size() == data.train.size());
  for (std::size_t i = 0; i < loaded.train.size(); ++i) {
    CHECK(loaded.train[i].trajectory.features ==
          data.train[i].trajectory.features);
    CHECK(loaded.train[i].gold_rul == data.train[i].gold_rul);
    CHECK(loaded.train[i].target == data.train[i].target);
  }
  REQUIRE(loaded.test.size() == data.test.size());
  CHECK(loaded.test_rul == data.test_rul);
  for (std::size_t i = 0; i < loaded.test.size(); ++i) {
    CHECK(loaded.test[i].trajectory.features ==
          data.test[i].trajectory.features);
    CHECK(loaded.test[i].gold_rul == data.test[i].gold_rul);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("relabeling with a different cap regenerates targets") {
  SyntheticSpec spec;
  spec.num_train = 2;
  spec.num_test = 2;
  spec.min_len = 140;
  spec.max_len = 160;
  spec.seed = 8;
  auto data = prepare_dataset(generate_synthetic(spec), 130);
  relabel(data, 125);
  CHECK(data.cap == 125);
  for (const auto& labeled : data.train) {
    const int length = static_cast<int>(labeled.trajectory.length());
    CHECK(labeled.gold_rul == gold_rul_train(length, 125));
    CHECK(labeled.target.front() == 1.0);  // long runs saturate at the cap
  }
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const int length = static_cast<int>(data.test[i].trajectory.length());
    CHECK(data.test[i].gold_rul ==
          gold_rul_test(data.test_rul[i], length, 125));
  }
}

}  // TEST_SUITE
