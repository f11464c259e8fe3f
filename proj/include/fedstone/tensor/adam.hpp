#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "fedstone/errors.hpp"
#include "fedstone/tensor/parameter_vector.hpp"

namespace fedstone {

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
  // false: L2 term added to the gradient before the moment updates.
  // true: parameters shrink by lr * weight_decay before the Adam step.
  bool decoupled_weight_decay = false;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  OptimizerState() = default;
  OptimizerState(std::size_t n, AdamHyper h)
      : first_moment(n, 0.0), second_moment(n, 0.0), hyper(h) {}
};

/// In-place Adam step with bias correction.
inline void adam_update(OptimizerState& state, ParameterVector& params,
                        const ParameterVector& grad) {
  const std::size_t n = params.values.size();
  if (grad.values.size() != n || grad.layout != params.layout)
    throw ConfigError("gradient shape does not match parameters");
  if (state.first_moment.empty() && state.second_moment.empty() && n > 0) {
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n)
    throw ConfigError("optimizer state shape does not match parameters");

  const AdamHyper& h = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  const double coupled_wd = h.decoupled_weight_decay ? 0.0 : h.weight_decay;
  const double shrink =
      h.decoupled_weight_decay ? 1.0 - h.learning_rate * h.weight_decay : 1.0;

  double* p = params.values.data();
  const double* g = grad.values.data();
  double* m = state.first_moment.data();
  double* v = state.second_moment.data();
  const double b1 = h.beta1, b2 = h.beta2;
  const double lr = h.learning_rate, eps = h.epsilon;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i] + coupled_wd * p[i];
    m[i] = b1 * m[i] + (1.0 - b1) * gi;
    v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] = p[i] * shrink - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

inline std::pair<ParameterVector, OptimizerState> adam_step(
    OptimizerState state, ParameterVector params, const ParameterVector& grad) {
  adam_update(state, params, grad);
  return {std::move(params), std::move(state)};
}

}  // namespace fedstone
