#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fusion_mammo/tensor/tensor.hpp"

namespace fusion_mammo {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// First/second moment estimates for a fixed list of parameters.
class AdamState {
 public:
  AdamState(std::span<Tensor* const> params, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(float lr) { config_.learning_rate = lr; }
  std::uint64_t step_count() const { return t_; }
  std::span<const float> first_moment(std::size_t param) const { return m_.at(param); }
  std::span<const float> second_moment(std::size_t param) const { return v_.at(param); }
  std::size_t parameter_count() const { return m_.size(); }

 private:
  friend void adam_step(std::span<Tensor* const> params, AdamState& state);

  AdamConfig config_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::uint64_t t_ = 0;
};

/// One bias-corrected Adam update. Every parameter must carry a gradient
/// (StateError otherwise); the parameter list must match the one the state
/// was created for.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace fusion_mammo
