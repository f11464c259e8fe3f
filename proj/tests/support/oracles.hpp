#pragma once

// Reference computations written independently of the library code paths
// they check. Only the parameter layout convention is shared.

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedstone/tensor/model.hpp"
#include "fedstone/tensor/parameter_vector.hpp"

namespace fedstone::testing {

/// Straight-line MLP: explicit triple loops over (sample, output, input).
inline std::vector<std::vector<double>> naive_forward(const ModelSpec& spec,
                                                      const std::vector<double>& params,
                                                      const std::vector<std::vector<double>>& x) {
  std::vector<std::vector<double>> act = x;
  std::size_t off = 0;
  const std::size_t layers = spec.hidden_dims.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_in = l == 0 ? spec.input_dim : spec.hidden_dims[l - 1];
    const std::size_t n_out = l + 1 < layers ? spec.hidden_dims[l] : spec.num_classes;
    const std::size_t w_off = off;
    const std::size_t b_off = off + n_in * n_out;
    std::vector<std::vector<double>> next(act.size(), std::vector<double>(n_out));
    for (std::size_t b = 0; b < act.size(); ++b) {
      for (std::size_t j = 0; j < n_out; ++j) {
        double z = params[b_off + j];
        for (std::size_t i = 0; i < n_in; ++i) z += act[b][i] * params[w_off + i * n_out + j];
        next[b][j] = (l + 1 < layers) ? std::max(z, 0.0) : z;
      }
    }
    act = std::move(next);
    off = b_off + n_out;
  }
  return act;
}

/// Mean cross-entropy evaluated in extended precision.
inline long double extended_cross_entropy(const std::vector<std::vector<double>>& logits,
                                          const std::vector<int>& labels) {
  long double total = 0.0L;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    long double m = logits[b][0];
    for (double v : logits[b]) m = std::max<long double>(m, v);
    long double s = 0.0L;
    for (double v : logits[b]) s += std::exp(static_cast<long double>(v) - m);
    total += m + std::log(s) - static_cast<long double>(logits[b][static_cast<std::size_t>(labels[b])]);
  }
  return total / static_cast<long double>(logits.size());
}

/// Loss through the naive forward pass, in extended precision.
inline long double reference_loss(const ModelSpec& spec, const std::vector<double>& params,
                                  const Batch& batch) {
  std::vector<std::vector<double>> x(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    x[b].assign(batch.inputs.row(b).begin(), batch.inputs.row(b).end());
  return extended_cross_entropy(naive_forward(spec, params, x), batch.labels);
}

/// Central differences of the reference loss over every coordinate.
inline std::vector<double> finite_difference_gradient(const ModelSpec& spec,
                                                      const ParameterVector& params,
                                                      const Batch& batch, double h = 1e-5) {
  std::vector<double> p = params.values;
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const long double up = reference_loss(spec, p, batch);
    p[i] = saved - h;
    const long double down = reference_loss(spec, p, batch);
    p[i] = saved;
    g[i] = static_cast<double>((up - down) / (2.0L * h));
  }
  return g;
}

/// |a - b| / max(|a|, |b|, floor); 0 when both vanish.
inline double relative_error(double a, double b, double floor = 0.0) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// sum_i n_i * theta_i / sum_i n_i, accumulated in extended precision.
inline std::vector<double> weighted_mean(const std::vector<std::vector<double>>& thetas,
                                         const std::vector<double>& counts) {
  std::vector<double> out(thetas.front().size());
  long double total = 0.0L;
  for (double c : counts) total += c;
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < thetas.size(); ++i)
      s += static_cast<long double>(counts[i]) * thetas[i][k];
    out[k] = static_cast<double>(s / total);
  }
  return out;
}

}  // namespace fedstone::testing
