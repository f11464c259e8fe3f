#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedstone/corruption/corruption.hpp"
#include "fedstone/data/dataset.hpp"
#include "fedstone/data/partition.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/federation/server.hpp"
#include "fedstone/orchestrator/selection.hpp"
#include "fedstone/random.hpp"

namespace fedstone {

/// Everything shared by the two stages: data scale, model and optimizer,
/// aggregation rule, and the root seed.
struct ExperimentSetup {
  ImageGeometry geometry;
  int patches_per_class = 2000;
  int per_class_test = 200;
  double validation_fraction = 0.10;
  TrainOptions train;
  AggregationWeighting aggregation = AggregationWeighting::kExampleCount;
  std::uint64_t seed = 0;

  ModelSpec model() const {
    ModelSpec m = train.model;
    m.input_dim = geometry.numel();
    m.num_classes = kNumClasses;
    return m;
  }

  TrainOptions train_options() const {
    TrainOptions t = train;
    t.model = model();
    return t;
  }

  FederationConfig federation(int n_e, int n_r) const {
    FederationConfig c;
    c.n_rounds = n_r;
    c.local_epochs = n_e;
    c.train = train_options();
    c.aggregation = aggregation;
    c.seed = mix_keys(seed, {fnv1a("federation")});
    return c;
  }

  std::uint64_t generation_seed(Source s) const {
    return mix_keys(seed, {fnv1a("generate"), static_cast<std::uint64_t>(s)});
  }
  std::uint64_t partition_seed() const { return mix_keys(seed, {fnv1a("partition")}); }
  std::uint64_t split_seed() const { return mix_keys(seed, {fnv1a("good_corrupted")}); }
  std::uint64_t init_seed() const { return mix_keys(seed, {fnv1a("init")}); }
};

struct Hospitals {
  DatasetPartition a;
  DatasetPartition b;
};

inline DatasetPartition build_partition(const ExperimentSetup& setup, Source s) {
  return partition_dataset(
      generate_dataset(s, setup.patches_per_class, setup.generation_seed(s), setup.geometry),
      setup.per_class_test, setup.validation_fraction, setup.partition_seed());
}

inline Hospitals build_hospitals(const ExperimentSetup& setup) {
  return {build_partition(setup, Source::kA), build_partition(setup, Source::kB)};
}

inline ClientData client_from(std::string id, const DatasetPartition& p) {
  return {std::move(id), p.train, p.validation, p.test};
}

/// The clean two-client setting: one client per hospital.
inline std::vector<ClientData> lpo_clients(const Hospitals& h) {
  return {client_from("A", h.a), client_from("B", h.b)};
}

// --------------------------------------------------------------------------
// Warm start

struct PretrainSpec {
  bool enabled = false;
  int epochs = 1;
  int patches_per_class = 500;
  // Keep the seeded output layer rather than the source task's, as when a
  // pretrained backbone gets a fresh classifier head for a new label set.
  bool reset_head = true;
};

/// Centralized training on the clean source task, starting from the same
/// seeded initialization the federation would use. Returns nothing when
/// disabled.
inline std::optional<ParameterVector> pretrain_source(const PretrainSpec& spec,
                                                      const ExperimentSetup& setup) {
  if (!spec.enabled) return std::nullopt;
  if (spec.epochs < 0) throw ConfigError("pretrain.epochs must be >= 0");
  const ModelSpec model = setup.model();
  const ParameterVector init = init_global(model, setup.init_seed());
  if (spec.epochs == 0) return init;

  const auto source = generate_dataset(
      Source::kS, spec.patches_per_class, setup.generation_seed(Source::kS), setup.geometry);
  ParameterVector params = init;
  Rng rng = derive_stream(setup.seed, {fnv1a("pretrain")});
  train_epochs(setup.train_options(), params, source, spec.epochs, rng);
  if (spec.reset_head) {
    const std::size_t head = params.layout.size() - 2;
    const std::size_t off = params.offset(head);
    std::copy(init.values.begin() + static_cast<std::ptrdiff_t>(off), init.values.end(),
              params.values.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return params;
}

// --------------------------------------------------------------------------
// Stage 1: epochs x rounds grid search

struct GridSpec {
  std::vector<int> n_e_values{1, 2, 4, 7, 10};
  std::vector<int> n_r_values{1, 2, 4, 7, 10};

  static GridSpec full() {
    GridSpec g;
    g.n_e_values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    g.n_r_values = g.n_e_values;
    return g;
  }

  void validate() const {
    if (n_e_values.empty()) throw ConfigError("grid.n_e must not be empty");
    if (n_r_values.empty()) throw ConfigError("grid.n_r must not be empty");
    for (int v : n_e_values)
      if (v < 1) throw ConfigError("grid.n_e values must be >= 1");
    for (int v : n_r_values)
      if (v < 1) throw ConfigError("grid.n_r values must be >= 1");
  }
};

struct GridResult {
  AccuracyMatrix accuracy;
  GridCell best;
  double best_accuracy = 0.0;
  // Round records of each cell, keyed by (n_e, n_r).
  std::map<std::pair<int, int>, std::vector<RoundRecord>> cell_records;
};

enum class GridExecution {
  // Every cell is its own federation from the shared initial parameters.
  kIndependent,
  // One federation per n_e, run to the largest n_r; cell (n_e, n_r) reads
  // the global model after round n_r. Rounds depend only on (seed, client,
  // round) and the incoming parameters, so each prefix is bit-identical to
  // an independent run of that length.
  kSharedPrefix,
};

struct LpoOptions {
  GridExecution execution = GridExecution::kSharedPrefix;
  // Permutation of job indices (cells, or n_e rows for shared prefixes);
  // empty means natural order.
  std::vector<std::size_t> order;
  std::optional<ParameterVector> warm_start;
  // Invoked after every finished cell.
  std::function<void(const GridCell&, double)> on_cell;
};

inline GridResult run_lpo(const ExperimentSetup& setup, const GridSpec& grid,
                          const LpoOptions& options = {}) {
  grid.validate();
  const Hospitals hospitals = build_hospitals(setup);
  const auto clients = lpo_clients(hospitals);
  const PreparedEvalSet eval = prepare_eval_set(union_test_set(clients), setup.train.stats);
  const ParameterVector initial = init_global(setup.model(), setup.init_seed(), options.warm_start);

  GridResult result;
  result.accuracy = {grid.n_e_values, grid.n_r_values,
                     std::vector<double>(grid.n_e_values.size() * grid.n_r_values.size(), 0.0)};

  const std::size_t rows = grid.n_e_values.size();
  const std::size_t cols = grid.n_r_values.size();
  const std::size_t jobs = options.execution == GridExecution::kSharedPrefix ? rows : rows * cols;
  std::vector<std::size_t> order = options.order;
  if (order.empty()) {
    order.resize(jobs);
    for (std::size_t i = 0; i < jobs; ++i) order[i] = i;
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted.size() != jobs || sorted[i] != i)
        throw ConfigError("LPO execution order is not a permutation of the jobs");
  }

  auto record_cell = [&](std::size_t i, std::size_t j, const std::vector<RoundRecord>& records) {
    const GridCell cell{grid.n_e_values[i], grid.n_r_values[j]};
    const double acc = records.at(static_cast<std::size_t>(cell.n_r) - 1).global_accuracy;
    result.accuracy.at(i, j) = acc;
    result.cell_records[{cell.n_e, cell.n_r}] =
        std::vector<RoundRecord>(records.begin(), records.begin() + cell.n_r);
    if (options.on_cell) options.on_cell(cell, acc);
  };

  for (std::size_t job : order) {
    try {
      if (options.execution == GridExecution::kSharedPrefix) {
        const std::size_t i = job;
        const int max_r = *std::max_element(grid.n_r_values.begin(), grid.n_r_values.end());
        const auto fed =
            run_federation(setup.federation(grid.n_e_values[i], max_r), clients, eval, initial);
        for (std::size_t j = 0; j < cols; ++j) record_cell(i, j, fed.records);
      } else {
        const std::size_t i = job / cols, j = job % cols;
        const auto fed = run_federation(
            setup.federation(grid.n_e_values[i], grid.n_r_values[j]), clients, eval, initial);
        record_cell(i, j, fed.records);
      }
    } catch (const Error& e) {
      const std::size_t i = options.execution == GridExecution::kSharedPrefix ? job : job / cols;
      throw Error("LPO cell with n_e=" + std::to_string(grid.n_e_values[i]) + " failed: " +
                  e.what());
    }
  }

  result.best = select_optimal(result.accuracy);
  result.best_accuracy = accuracy_at(result.accuracy, result.best);
  return result;
}

// --------------------------------------------------------------------------
// Stage 2: robustness validation with good and corrupted clients

struct FrvOptions {
  std::uint64_t corruption_seed = 0;
  const SeverityTables* tables = &release_tables();
  std::optional<int> fixed_severity;
  std::optional<ParameterVector> warm_start;
};

struct FrvResult {
  GridCell applied;
  std::vector<std::string> clients;
  double final_accuracy = 0.0;
  std::vector<RoundRecord> round_records;
  ParameterVector final_params;
};

/// The four-client setting: each hospital split into a good half and a half
/// whose train, validation and test samples are all corrupted.
inline std::vector<ClientData> frv_clients(const ExperimentSetup& setup, const Hospitals& h,
                                           const FrvOptions& options) {
  std::vector<ClientData> clients;
  for (const auto* part : {&h.a, &h.b}) {
    const std::string name(to_string(part->source));
    auto [good, bad] = split_good_corrupted(*part, setup.split_seed());
    auto corrupt = [&](std::vector<LabeledSample> v) {
      return corrupt_dataset(std::move(v), options.corruption_seed, *options.tables,
                             options.fixed_severity);
    };
    bad.train = corrupt(std::move(bad.train));
    bad.validation = corrupt(std::move(bad.validation));
    bad.test = corrupt(std::move(bad.test));
    clients.push_back(client_from(name + "-good", good));
    clients.push_back(client_from(name + "-corrupted", bad));
  }
  return clients;
}

inline FrvResult run_frv(const ExperimentSetup& setup, const GridCell& optimal,
                         const FrvOptions& options = {}, const RoundObserver& observer = {}) {
  if (optimal.n_e < 1 || optimal.n_r < 1)
    throw ConfigError("FRV needs an LPO optimum with n_e, n_r >= 1");
  const Hospitals hospitals = build_hospitals(setup);
  const auto clients = frv_clients(setup, hospitals, options);
  const PreparedEvalSet eval = prepare_eval_set(union_test_set(clients), setup.train.stats);
  const ParameterVector initial = init_global(setup.model(), setup.init_seed(), options.warm_start);
  auto fed = run_federation(setup.federation(optimal.n_e, optimal.n_r), clients, eval, initial,
                            observer);
  FrvResult out;
  out.applied = optimal;
  for (const auto& c : clients) out.clients.push_back(c.id);
  out.final_accuracy = fed.records.back().global_accuracy;
  out.round_records = std::move(fed.records);
  out.final_params = std::move(fed.params);
  return out;
}

}  // namespace fedstone
