#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedstone/errors.hpp"

namespace fedstone {

enum class Activation { kRelu };

/// Architecture of the feed-forward classifier. An empty `hidden_dims` is
/// plain softmax regression.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t num_classes = 6;
  Activation activation = Activation::kRelu;

  std::size_t num_layers() const { return hidden_dims.size() + 1; }

  /// Width of the activation entering layer `l` (0 is the input).
  std::size_t width(std::size_t l) const {
    if (l == 0) return input_dim;
    if (l <= hidden_dims.size()) return hidden_dims[l - 1];
    return num_classes;
  }

  void validate() const {
    if (input_dim < 1) throw ConfigError("model.input_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct TensorShape {
  std::string name;
  std::vector<std::size_t> dims;

  std::size_t numel() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

using Layout = std::vector<TensorShape>;

inline std::size_t layout_numel(const Layout& layout) {
  std::size_t n = 0;
  for (const auto& t : layout) n += t.numel();
  return n;
}

/// Layer `l` contributes "fc<l>.weight" stored input-major [in][out] and
/// "fc<l>.bias" [out].
inline Layout layout_for(const ModelSpec& spec) {
  Layout layout;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::string prefix = "fc" + std::to_string(l);
    layout.push_back({prefix + ".weight", {spec.width(l), spec.width(l + 1)}});
    layout.push_back({prefix + ".bias", {spec.width(l + 1)}});
  }
  return layout;
}

/// Flat, ordered model weights; the unit exchanged between server and clients.
struct ParameterVector {
  std::vector<double> values;
  Layout layout;

  ParameterVector() = default;
  explicit ParameterVector(Layout l)
      : values(layout_numel(l), 0.0), layout(std::move(l)) {}
  ParameterVector(Layout l, std::vector<double> v)
      : values(std::move(v)), layout(std::move(l)) {
    if (values.size() != layout_numel(layout))
      throw ConfigError("parameter count " + std::to_string(values.size()) +
                        " does not match layout size " +
                        std::to_string(layout_numel(layout)));
  }

  std::size_t size() const { return values.size(); }

  /// Offset of the `index`-th tensor within `values`.
  std::size_t offset(std::size_t index) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < index; ++i) off += layout[i].numel();
    return off;
  }

  std::span<double> tensor(std::size_t index) {
    return {values.data() + offset(index), layout[index].numel()};
  }
  std::span<const double> tensor(std::size_t index) const {
    return {values.data() + offset(index), layout[index].numel()};
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const ParameterVector&,
                         const ParameterVector&) = default;
};

inline ParameterVector zeros_like(const ParameterVector& p) {
  return ParameterVector(p.layout);
}

inline void require_layout(const ModelSpec& spec, const ParameterVector& p) {
  if (p.layout != layout_for(spec) || p.values.size() != layout_numel(p.layout))
    throw ConfigError("parameter layout does not match model spec");
}

}  // namespace fedstone
