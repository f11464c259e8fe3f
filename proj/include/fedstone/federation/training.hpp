#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fedstone/data/dataset.hpp"
#include "fedstone/data/transforms.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/federation/transport.hpp"
#include "fedstone/random.hpp"
#include "fedstone/tensor/adam.hpp"
#include "fedstone/tensor/model.hpp"

namespace fedstone {

struct TrainOptions {
  ModelSpec model;
  AdamHyper optimizer;
  std::size_t batch_size = 4;
  NormalizationStats stats;
};

/// Fresh parameters drawn U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights
/// and biases, or `warm_start` verbatim when given.
inline ParameterVector init_global(const ModelSpec& spec, std::uint64_t seed,
                                   const std::optional<ParameterVector>& warm_start = std::nullopt) {
  spec.validate();
  if (warm_start) {
    require_layout(spec, *warm_start);
    return *warm_start;
  }
  ParameterVector p(layout_for(spec));
  Rng rng = derive_stream(seed, {fnv1a("init_global")});
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t fan_in = spec.width(l);
    const std::size_t count = fan_in * spec.width(l + 1) + spec.width(l + 1);
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    for (std::size_t i = 0; i < count; ++i) p.values[off + i] = rng.uniform(-bound, bound);
    off += count;
  }
  return p;
}

/// Stream used by one training session of `trainer_id` in round `round`.
inline Rng training_stream(std::uint64_t seed, std::string_view trainer_id, std::uint64_t round) {
  return derive_stream(seed, {fnv1a(trainer_id), round, fnv1a("local_train")});
}

/// `epochs` epochs of mini-batch Adam from `params` with a fresh optimizer.
/// Each epoch shuffles the data and draws one augmentation per sample, all
/// from `rng`. Returns the sample-mean loss of the last epoch.
inline double train_epochs(const TrainOptions& opts, ParameterVector& params,
                           const std::vector<LabeledSample>& data, int epochs, Rng& rng) {
  if (data.empty()) throw ConfigError("cannot train on an empty dataset");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (opts.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  require_layout(opts.model, params);

  OptimizerState state(params.size(), opts.optimizer);
  ParameterVector grad = zeros_like(params);
  Workspace ws;
  std::vector<std::size_t> order(data.size());
  const std::size_t dim = opts.model.input_dim;
  double last_epoch_loss = 0.0;

  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t B = std::min(opts.batch_size, order.size() - start);
      Batch batch{Matrix(B, dim), std::vector<int>(B)};
      for (std::size_t b = 0; b < B; ++b) {
        const LabeledSample& s = data[order[start + b]];
        if (s.image.size() != dim)
          throw ConfigError("sample size " + std::to_string(s.image.size()) +
                            " does not match model input_dim " + std::to_string(dim));
        train_transform_into(s.image, draw_augment(rng), opts.stats, batch.inputs.row(b));
        batch.labels[b] = s.label;
      }
      const double loss = loss_and_gradient(opts.model, params, batch, grad, ws);
      loss_sum += loss * static_cast<double>(B);
      adam_update(state, params, grad);
    }
    last_epoch_loss = loss_sum / static_cast<double>(order.size());
  }
  if (!params.all_finite()) throw NumericError("training produced non-finite parameters");
  return last_epoch_loss;
}

/// Transformed evaluation inputs, computed once and reused across rounds.
struct PreparedEvalSet {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

inline PreparedEvalSet prepare_eval_set(const std::vector<LabeledSample>& samples,
                                        const NormalizationStats& stats) {
  PreparedEvalSet out;
  if (samples.empty()) return out;
  const std::size_t dim = samples.front().image.size();
  out.features = Matrix(samples.size(), dim);
  out.labels.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].image.size() != dim) throw ConfigError("eval samples differ in size");
    const auto f = eval_transform(samples[i].image, stats);
    std::copy(f.begin(), f.end(), out.features.row(i).begin());
    out.labels.push_back(samples[i].label);
  }
  return out;
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::size_t> per_class_count;
};

inline Evaluation evaluate_global(const ModelSpec& spec, const ParameterVector& params,
                                  const PreparedEvalSet& eval) {
  if (eval.size() == 0) throw ConfigError("evaluation set is empty");
  require_layout(spec, params);
  if (eval.features.cols != spec.input_dim)
    throw ConfigError("evaluation inputs do not match model input_dim");
  const std::size_t K = spec.num_classes;
  std::vector<std::size_t> correct(K, 0), count(K, 0);
  double loss_sum = 0.0;
  std::size_t hits = 0;
  Workspace ws;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < eval.size(); start += kChunk) {
    const std::size_t B = std::min(kChunk, eval.size() - start);
    Matrix chunk(B, spec.input_dim);
    std::copy_n(eval.features.data.begin() + static_cast<std::ptrdiff_t>(start * spec.input_dim),
                B * spec.input_dim, chunk.data.begin());
    const Matrix& logits = detail::forward_into(spec, params, chunk, ws);
    for (std::size_t b = 0; b < B; ++b) {
      const int y = eval.labels[start + b];
      if (y < 0 || static_cast<std::size_t>(y) >= K) throw InputError("eval label out of range");
      const auto row = logits.row(b);
      loss_sum += log_sum_exp(row) - row[static_cast<std::size_t>(y)];
      const bool ok = argmax(row) == static_cast<std::size_t>(y);
      hits += ok;
      correct[static_cast<std::size_t>(y)] += ok;
      count[static_cast<std::size_t>(y)] += 1;
    }
  }
  Evaluation ev;
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(eval.size());
  ev.loss = loss_sum / static_cast<double>(eval.size());
  ev.per_class_count = count;
  for (std::size_t k = 0; k < K; ++k)
    ev.per_class_accuracy.push_back(
        count[k] ? static_cast<double>(correct[k]) / static_cast<double>(count[k]) : 0.0);
  return ev;
}

inline Evaluation evaluate_global(const ModelSpec& spec, const ParameterVector& params,
                                  const std::vector<LabeledSample>& samples,
                                  const NormalizationStats& stats) {
  if (samples.empty()) throw ConfigError("evaluation set is empty");
  return evaluate_global(spec, params, prepare_eval_set(samples, stats));
}

/// A client's private data. Never leaves the client except as statistics.
struct ClientData {
  std::string id;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::vector<LabeledSample> test;
};

/// One client's round: train `local_epochs` epochs from the broadcast
/// parameters with a fresh optimizer, then report the result.
inline ClientUpdate local_train(const ClientData& client, const ParameterVector& global_params,
                                int local_epochs, std::uint64_t round_index,
                                const TrainOptions& opts, std::uint64_t seed) {
  if (client.train.empty())
    throw ConfigError("client '" + client.id + "' has an empty training set");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  ClientUpdate u;
  u.client_id = client.id;
  u.round_index = round_index;
  u.params = global_params;
  Rng rng = training_stream(seed, client.id, round_index);
  u.train_loss = train_epochs(opts, u.params, client.train, local_epochs, rng);
  u.num_examples = client.train.size();
  u.validation_loss =
      client.validation.empty()
          ? 0.0
          : evaluate_global(opts.model, u.params, client.validation, opts.stats).loss;
  return u;
}

/// Centralized reference: `rounds` sessions of `epochs` epochs over `data`,
/// resetting the optimizer between sessions and drawing from the same
/// per-session streams a federated client with id `trainer_id` would use.
inline ParameterVector train_centralized(const TrainOptions& opts, ParameterVector params,
                                         const std::vector<LabeledSample>& data,
                                         std::string_view trainer_id, int rounds, int epochs,
                                         std::uint64_t seed) {
  for (int r = 1; r <= rounds; ++r) {
    Rng rng = training_stream(seed, trainer_id, static_cast<std::uint64_t>(r));
    train_epochs(opts, params, data, epochs, rng);
  }
  return params;
}

}  // namespace fedstone
