#pragma once

#include <cmath>
#include <cstdint>

#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"

namespace v7w {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter optimizer state. Moments start at zero.
struct AdamState {
  std::uint64_t step_count = 0;
  Tensor first_moment;
  Tensor second_moment;
  AdamConfig config;

  AdamState() = default;
  AdamState(const Shape& shape, AdamConfig cfg)
      : first_moment(shape), second_moment(shape), config(cfg) {}
};

/// One bias-corrected Adam update of `param` in place.
inline void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
  if (param.shape() != grad.shape()) {
    throw DimensionError("adam_step: parameter " + shape_string(param.shape()) + " vs gradient " +
                         shape_string(grad.shape()));
  }
  if (state.first_moment.empty()) {
    state.first_moment = Tensor(param.shape());
    state.second_moment = Tensor(param.shape());
  } else if (state.first_moment.shape() != param.shape()) {
    throw DimensionError("adam_step: state " + shape_string(state.first_moment.shape()) +
                         " vs parameter " + shape_string(param.shape()));
  }
  const AdamConfig& cfg = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  auto p = param.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace v7w
