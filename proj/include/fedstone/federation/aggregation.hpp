#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedstone/errors.hpp"
#include "fedstone/federation/transport.hpp"
#include "fedstone/tensor/parameter_vector.hpp"

namespace fedstone {

enum class AggregationWeighting {
  kExampleCount,  // FedAvg: weight_i = num_examples_i
  kUniform,       // plain mean over clients
};

/// Coordinate-wise weighted mean of client parameters. Updates are
/// canonically ordered by client_id before summation, so the result does not
/// depend on arrival order. Each coordinate is clamped to the [min, max] of
/// its inputs to absorb rounding.
inline ParameterVector fedavg(std::vector<ClientUpdate> updates,
                              AggregationWeighting weighting = AggregationWeighting::kExampleCount) {
  if (updates.empty()) throw ProtocolError("fedavg received no updates");
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });
  const Layout& layout = updates.front().params.layout;
  const std::size_t n = updates.front().params.values.size();
  for (const auto& u : updates) {
    if (u.params.layout != layout || u.params.values.size() != n)
      throw ProtocolError("update from client '" + u.client_id + "' has a mismatched layout");
    if (!u.params.all_finite())
      throw ProtocolError("update from client '" + u.client_id + "' contains non-finite values");
    if (weighting == AggregationWeighting::kExampleCount && u.num_examples == 0)
      throw ProtocolError("update from client '" + u.client_id + "' reports zero examples");
  }
  if (updates.size() == 1) return updates.front().params;

  // Extended-precision accumulation keeps coordinates where clients nearly
  // cancel accurate to well below double rounding of the individual terms.
  long double total = 0.0L;
  std::vector<long double> weights;
  for (const auto& u : updates) {
    const long double w = weighting == AggregationWeighting::kExampleCount
                              ? static_cast<long double>(u.num_examples)
                              : 1.0L;
    weights.push_back(w);
    total += w;
  }

  std::vector<long double> acc(n, 0.0L);
  std::vector<double> lo = updates.front().params.values;
  std::vector<double> hi = lo;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const long double w = weights[k];
    const double* src = updates[k].params.values.data();
    for (std::size_t i = 0; i < n; ++i) {
      acc[i] += w * static_cast<long double>(src[i]);
      lo[i] = std::min(lo[i], src[i]);
      hi[i] = std::max(hi[i], src[i]);
    }
  }
  ParameterVector out(layout);
  for (std::size_t i = 0; i < n; ++i)
    out.values[i] = std::clamp(static_cast<double>(acc[i] / total), lo[i], hi[i]);
  if (!out.all_finite()) throw ProtocolError("aggregate is not finite");
  return out;
}

}  // namespace fedstone
