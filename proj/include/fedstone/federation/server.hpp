#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedstone/errors.hpp"
#include "fedstone/federation/aggregation.hpp"
#include "fedstone/federation/training.hpp"
#include "fedstone/federation/transport.hpp"

namespace fedstone {

struct FederationConfig {
  int n_rounds = 1;
  int local_epochs = 1;
  TrainOptions train;
  AggregationWeighting aggregation = AggregationWeighting::kExampleCount;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_rounds < 1) throw ConfigError("federation.n_rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("federation.local_epochs must be >= 1");
    if (train.batch_size < 1) throw ConfigError("federation.batch_size must be >= 1");
    train.model.validate();
  }
};

struct ClientRoundStats {
  std::string client_id;
  double train_loss = 0.0;
  std::uint64_t num_examples = 0;
  double validation_loss = 0.0;
};

struct RoundRecord {
  std::uint64_t round_index = 0;
  std::vector<ClientRoundStats> per_client;
  double global_accuracy = 0.0;
  double global_loss = 0.0;
  std::vector<double> per_class_accuracy;
  double wall_time = 0.0;  // seconds; written to the timing sidecar only
};

/// Deterministic round-log line (no timing).
inline std::string round_log_line(const RoundRecord& r) {
  nlohmann::json clients = nlohmann::json::array();
  for (const auto& c : r.per_client)
    clients.push_back({{"client_id", c.client_id},
                       {"train_loss", c.train_loss},
                       {"num_examples", c.num_examples},
                       {"validation_loss", c.validation_loss}});
  nlohmann::json j{{"round_index", r.round_index},
                   {"per_client", clients},
                   {"global_accuracy", r.global_accuracy},
                   {"global_loss", r.global_loss},
                   {"per_class_accuracy", r.per_class_accuracy}};
  return j.dump();
}

inline std::string timing_line(const RoundRecord& r) {
  return nlohmann::json{{"round_index", r.round_index}, {"wall_time", r.wall_time}}.dump();
}

inline void check_clients(const std::vector<ClientData>& clients) {
  if (clients.empty()) throw ConfigError("federation needs at least one client");
  std::set<std::string> ids;
  std::set<std::uint64_t> samples;
  for (const auto& c : clients) {
    if (!ids.insert(c.id).second) throw ConfigError("duplicate client id '" + c.id + "'");
    if (c.train.empty()) throw ConfigError("client '" + c.id + "' has an empty training set");
    for (const auto* split : {&c.train, &c.validation, &c.test})
      for (const auto& s : *split)
        if (!samples.insert(s.id).second)
          throw ConfigError("client '" + c.id + "' shares sample " + std::to_string(s.id) +
                            " with another client");
  }
}

/// broadcast -> local training on every client -> FedAvg -> evaluation.
/// Any client failure aborts the round before aggregation.
inline std::pair<ParameterVector, RoundRecord> run_round(
    const ParameterVector& global_params, const std::vector<ClientData>& clients,
    const FederationConfig& config, const PreparedEvalSet& eval, std::uint64_t round_index,
    InProcessTransport& transport) {
  const auto start = std::chrono::steady_clock::now();
  for (const auto& c : clients) transport.send_params(c.id, {round_index, global_params});

  for (const auto& c : clients) {
    const GlobalModelMessage msg = transport.recv_params(c.id);
    if (msg.round_index != round_index) throw ProtocolError("stale global model for " + c.id);
    transport.send_update(
        local_train(c, msg.params, config.local_epochs, round_index, config.train, config.seed));
  }

  std::vector<ClientUpdate> updates = transport.recv_updates();
  if (updates.size() != clients.size())
    throw ProtocolError("expected " + std::to_string(clients.size()) + " updates, got " +
                        std::to_string(updates.size()));
  RoundRecord record;
  record.round_index = round_index;
  for (const auto& u : updates) {
    if (u.round_index != round_index)
      throw ProtocolError("update from '" + u.client_id + "' belongs to another round");
    record.per_client.push_back({u.client_id, u.train_loss, u.num_examples, u.validation_loss});
  }
  ParameterVector next = fedavg(std::move(updates), config.aggregation);
  const Evaluation ev = evaluate_global(config.train.model, next, eval);
  record.global_accuracy = ev.accuracy;
  record.global_loss = ev.loss;
  record.per_class_accuracy = ev.per_class_accuracy;
  record.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(next), std::move(record)};
}

struct FederationResult {
  ParameterVector params;
  std::vector<RoundRecord> records;
};

using RoundObserver = std::function<void(const RoundRecord&, const ParameterVector&)>;

/// n_rounds sequential rounds starting from `initial`. Rounds are numbered
/// from 1.
inline FederationResult run_federation(const FederationConfig& config,
                                       const std::vector<ClientData>& clients,
                                       const PreparedEvalSet& eval,
                                       const ParameterVector& initial,
                                       const RoundObserver& observer = {}) {
  config.validate();
  check_clients(clients);
  require_layout(config.train.model, initial);
  InProcessTransport transport;
  FederationResult result{initial, {}};
  for (int r = 1; r <= config.n_rounds; ++r) {
    auto [next, record] = run_round(result.params, clients, config, eval,
                                    static_cast<std::uint64_t>(r), transport);
    result.params = std::move(next);
    if (observer) observer(record, result.params);
    result.records.push_back(std::move(record));
  }
  return result;
}

/// Union of every client's test split: the server-side evaluation set.
inline std::vector<LabeledSample> union_test_set(const std::vector<ClientData>& clients) {
  std::vector<LabeledSample> out;
  for (const auto& c : clients) out.insert(out.end(), c.test.begin(), c.test.end());
  return out;
}

}  // namespace fedstone
