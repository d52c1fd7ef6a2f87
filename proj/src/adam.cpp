#include "rul/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "rul/kernels.hpp"
#include "rul/matrix.hpp"

namespace rul {

Adam::Adam(std::vector<std::pair<std::string, std::size_t>> groups,
           AdamConfig config)
    : config_(config), groups_(std::move(groups)) {
  moment1_.reserve(groups_.size());
  moment2_.reserve(groups_.size());
  for (const auto& [name, size] : groups_) {
    moment1_.emplace_back(size, 0.0);
    moment2_.emplace_back(size, 0.0);
  }
}

void Adam::step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads,
                double learning_rate) {
  if (params.size() != groups_.size() || grads.size() != groups_.size()) {
    throw std::invalid_argument("adam: group count mismatch");
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (params[g].size() != groups_[g].second ||
        grads[g].size() != groups_[g].second) {
      throw std::invalid_argument("adam: size mismatch for group " +
                                  groups_[g].first);
    }
    if (!all_finite(grads[g])) {
      throw std::runtime_error("adam: non-finite gradient in " +
                               groups_[g].first);
    }
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, double(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, double(step_count_));
  const auto& k = kernels::active();
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    k.adam_update(params[g].data(), moment1_[g].data(), moment2_[g].data(),
                  grads[g].data(), groups_[g].second, learning_rate,
                  config_.beta1, config_.beta2, config_.epsilon, bc1, bc2);
  }
}

}  // namespace rul
