#include "fusion_mammo/tensor/adam.hpp"

#include <cmath>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo {

AdamState::AdamState(std::span<Tensor* const> params, AdamConfig config) : config_(config) {
  if (!(config.beta1 >= 0.0f && config.beta1 < 1.0f) || !(config.beta2 >= 0.0f && config.beta2 < 1.0f)) {
    throw ArgumentError("adam: betas must lie in [0,1)");
  }
  if (!(config.epsilon > 0.0f) || !(config.learning_rate >= 0.0f)) {
    throw ArgumentError("adam: epsilon must be > 0 and learning rate >= 0");
  }
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.emplace_back(p->size(), 0.0f);
    v_.emplace_back(p->size(), 0.0f);
  }
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw StateError("adam: state tracks " + std::to_string(state.m_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) throw StateError("adam: parameter " + std::to_string(i) + " has no gradient");
    if (params[i]->size() != state.m_[i].size()) {
      throw StateError("adam: parameter " + std::to_string(i) + " changed size since state creation");
    }
  }

  const AdamConfig& c = state.config_;
  const std::uint64_t t = ++state.t_;
  const double correction1 = 1.0 - std::pow(static_cast<double>(c.beta1), static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(static_cast<double>(c.beta2), static_cast<double>(t));
  const float b1 = c.beta1;
  const float b2 = c.beta2;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->data();
    auto grad = params[i]->grad();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const float g = grad[j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      data[j] -= static_cast<float>(c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

}  // namespace fusion_mammo
