#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rul {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed list of named parameter groups. Moment
// buffers mirror the group shapes; step() applies one update across all
// groups and increments the shared step count.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, std::size_t>> groups,
       AdamConfig config = {});

  // params[i] and grads[i] must match the size of group i. Throws
  // std::runtime_error naming the group on a non-finite gradient.
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads,
            double learning_rate);

  long step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment(std::size_t group) const {
    return moment1_[group];
  }
  std::span<const double> second_moment(std::size_t group) const {
    return moment2_[group];
  }

 private:
  AdamConfig config_;
  long step_count_ = 0;
  std::vector<std::pair<std::string, std::size_t>> groups_;
  std::vector<std::vector<double>> moment1_;
  std::vector<std::vector<double>> moment2_;
};

}  // namespace rul
