#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedstone/errors.hpp"
#include "fedstone/tensor/parameter_vector.hpp"

namespace fedstone {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

struct Batch {
  Matrix inputs;            // B x input_dim
  std::vector<int> labels;  // B

  std::size_t size() const { return labels.size(); }
};

namespace detail {

inline void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.size() < 1) throw InputError("batch must contain at least one sample");
  if (batch.inputs.rows != batch.size() || batch.inputs.cols != spec.input_dim)
    throw ConfigError("batch shape " + std::to_string(batch.inputs.rows) + "x" +
                      std::to_string(batch.inputs.cols) +
                      " does not match model input_dim " +
                      std::to_string(spec.input_dim));
  for (double v : batch.inputs.data)
    if (!std::isfinite(v)) throw NumericError("non-finite value in batch inputs");
}

inline void check_labels(std::span<const int> labels, std::size_t num_classes) {
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw InputError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
}

// out[b][j] = bias[j] + sum_i in[b][i] * w[i][j]; the inner loop runs over
// the contiguous output index.
inline void affine(const Matrix& in, std::span<const double> w,
                   std::span<const double> bias, Matrix& out) {
  const std::size_t n_in = in.cols;
  const std::size_t n_out = bias.size();
  out.rows = in.rows;
  out.cols = n_out;
  out.data.resize(in.rows * n_out);
  for (std::size_t b = 0; b < in.rows; ++b) {
    double* o = out.data.data() + b * n_out;
    std::copy(bias.begin(), bias.end(), o);
    const double* x = in.data.data() + b * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* wr = w.data() + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) o[j] += xi * wr[j];
    }
  }
}

}  // namespace detail

/// Reusable activations for repeated forward/backward passes.
struct Workspace {
  std::vector<Matrix> pre;   // pre-activations per layer (z)
  std::vector<Matrix> post;  // activations per layer (a), post[0] unused
  Matrix delta;
  Matrix delta_prev;
};

namespace detail {

inline const Matrix& forward_into(const ModelSpec& spec,
                                  const ParameterVector& params,
                                  const Matrix& inputs, Workspace& ws) {
  const std::size_t layers = spec.num_layers();
  ws.pre.resize(layers);
  ws.post.resize(layers);
  const Matrix* current = &inputs;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_in = spec.width(l);
    const std::size_t n_out = spec.width(l + 1);
    std::span<const double> w(params.values.data() + offset, n_in * n_out);
    offset += n_in * n_out;
    std::span<const double> bias(params.values.data() + offset, n_out);
    offset += n_out;
    affine(*current, w, bias, ws.pre[l]);
    if (l + 1 < layers) {
      ws.post[l] = ws.pre[l];
      for (double& v : ws.post[l].data) v = v > 0.0 ? v : 0.0;
      current = &ws.post[l];
    }
  }
  return ws.pre[layers - 1];
}

}  // namespace detail

/// Raw logits, B x num_classes.
inline Matrix forward(const ModelSpec& spec, const ParameterVector& params,
                      const Batch& batch) {
  require_layout(spec, params);
  detail::check_batch(spec, batch);
  Workspace ws;
  return detail::forward_into(spec, params, batch.inputs, ws);
}

/// Numerically stable log-sum-exp of one row.
inline double log_sum_exp(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

/// Mean over the batch of -log softmax(logits)[label].
inline double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.cols < 2) throw InputError("cross_entropy needs at least 2 classes");
  if (labels.size() != logits.rows || logits.rows == 0)
    throw InputError("label count does not match logits rows");
  detail::check_labels(labels, logits.cols);
  double total = 0.0;
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const auto row = logits.row(b);
    total += log_sum_exp(row) - row[static_cast<std::size_t>(labels[b])];
  }
  const double loss = total / static_cast<double>(logits.rows);
  if (!std::isfinite(loss)) throw NumericError("cross_entropy produced non-finite loss");
  return std::max(loss, 0.0);
}

/// Backpropagates mean cross-entropy. Writes the gradient into `grad`
/// (resized to the parameter layout) and returns the loss.
inline double loss_and_gradient(const ModelSpec& spec,
                                const ParameterVector& params,
                                const Batch& batch, ParameterVector& grad,
                                Workspace& ws) {
  require_layout(spec, params);
  detail::check_batch(spec, batch);
  detail::check_labels(batch.labels, spec.num_classes);
  if (grad.layout != params.layout) grad = zeros_like(params);

  const Matrix& logits = detail::forward_into(spec, params, batch.inputs, ws);
  const std::size_t B = batch.size();
  const std::size_t K = spec.num_classes;
  const double inv_b = 1.0 / static_cast<double>(B);

  // dL/dlogits = (softmax - onehot) / B
  ws.delta.rows = B;
  ws.delta.cols = K;
  ws.delta.data.resize(B * K);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = logits.row(b);
    const double lse = log_sum_exp(row);
    const auto y = static_cast<std::size_t>(batch.labels[b]);
    total += lse - row[y];
    for (std::size_t k = 0; k < K; ++k)
      ws.delta(b, k) = (std::exp(row[k] - lse) - (k == y ? 1.0 : 0.0)) * inv_b;
  }

  std::vector<std::size_t> offsets(spec.num_layers());
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
      offsets[l] = off;
      off += spec.width(l) * spec.width(l + 1) + spec.width(l + 1);
    }
  }

  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const std::size_t n_in = spec.width(l);
    const std::size_t n_out = spec.width(l + 1);
    const Matrix& a_in = l == 0 ? batch.inputs : ws.post[l - 1];
    double* gw = grad.values.data() + offsets[l];
    double* gb = gw + n_in * n_out;
    const double* w = params.values.data() + offsets[l];

    // gW[i][j] = sum_b a_in[b][i] * delta[b][j], assigned on b == 0.
    for (std::size_t i = 0; i < n_in; ++i) {
      double* g_row = gw + i * n_out;
      {
        const double x = a_in(0, i);
        const double* d = ws.delta.data.data();
        for (std::size_t j = 0; j < n_out; ++j) g_row[j] = x * d[j];
      }
      for (std::size_t b = 1; b < B; ++b) {
        const double x = a_in(b, i);
        if (x == 0.0) continue;
        const double* d = ws.delta.data.data() + b * n_out;
        for (std::size_t j = 0; j < n_out; ++j) g_row[j] += x * d[j];
      }
    }
    for (std::size_t j = 0; j < n_out; ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) s += ws.delta(b, j);
      gb[j] = s;
    }

    if (l == 0) break;
    // delta_prev = (delta W^T) masked by relu'(z_{l-1})
    ws.delta_prev.rows = B;
    ws.delta_prev.cols = n_in;
    ws.delta_prev.data.assign(B * n_in, 0.0);
    const Matrix& z_prev = ws.pre[l - 1];
    for (std::size_t b = 0; b < B; ++b) {
      const double* d = ws.delta.data.data() + b * n_out;
      for (std::size_t i = 0; i < n_in; ++i) {
        if (z_prev(b, i) <= 0.0) continue;
        const double* wr = w + i * n_out;
        double s = 0.0;
        for (std::size_t j = 0; j < n_out; ++j) s += d[j] * wr[j];
        ws.delta_prev(b, i) = s;
      }
    }
    std::swap(ws.delta, ws.delta_prev);
  }

  const double loss = total * inv_b;
  if (!std::isfinite(loss)) throw NumericError("loss is not finite");
  return loss;
}

/// Analytic gradient of cross_entropy(forward(.)) with the parameter layout.
inline ParameterVector gradient(const ModelSpec& spec,
                                const ParameterVector& params,
                                const Batch& batch) {
  ParameterVector grad;
  Workspace ws;
  loss_and_gradient(spec, params, batch, grad, ws);
  return grad;
}

inline std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(
      std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace fedstone
