#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedstone/errors.hpp"
#include "fedstone/tensor/checkpoint.hpp"
#include "fedstone/tensor/parameter_vector.hpp"

namespace fedstone {

/// What a field carries across the client/server boundary. Nothing outside
/// this list may appear in a message.
enum class FieldRole { kParameters, kCount, kMetric, kClientId, kRoundIndex };

inline std::string_view to_string(FieldRole r) {
  switch (r) {
    case FieldRole::kParameters: return "parameters";
    case FieldRole::kCount: return "count";
    case FieldRole::kMetric: return "metric";
    case FieldRole::kClientId: return "client_id";
    case FieldRole::kRoundIndex: return "round_index";
  }
  return "?";
}

struct FieldInfo {
  std::string_view message;
  std::string_view name;
  FieldRole role;
};

/// Server -> client.
struct GlobalModelMessage {
  std::uint64_t round_index = 0;
  ParameterVector params;

  static constexpr std::string_view kName = "global_model";
  template <typename Self, typename F>
  static void for_each_field(Self& m, F&& f) {
    f("round_index", FieldRole::kRoundIndex, m.round_index);
    f("params", FieldRole::kParameters, m.params);
  }
};

/// Client -> server. The only thing a client ever sends.
struct ClientUpdate {
  std::string client_id;
  std::uint64_t round_index = 0;
  ParameterVector params;
  std::uint64_t num_examples = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;

  static constexpr std::string_view kName = "client_update";
  template <typename Self, typename F>
  static void for_each_field(Self& m, F&& f) {
    f("client_id", FieldRole::kClientId, m.client_id);
    f("round_index", FieldRole::kRoundIndex, m.round_index);
    f("params", FieldRole::kParameters, m.params);
    f("num_examples", FieldRole::kCount, m.num_examples);
    f("train_loss", FieldRole::kMetric, m.train_loss);
    f("validation_loss", FieldRole::kMetric, m.validation_loss);
  }
};

template <typename Message>
std::vector<FieldInfo> schema_of() {
  std::vector<FieldInfo> out;
  const Message probe{};
  Message::for_each_field(probe, [&](std::string_view name, FieldRole role, const auto&) {
    out.push_back({Message::kName, name, role});
  });
  return out;
}

/// Every field of every message type on the wire.
inline std::vector<FieldInfo> message_schema() {
  auto a = schema_of<GlobalModelMessage>();
  auto b = schema_of<ClientUpdate>();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

namespace detail {

inline nlohmann::json params_to_json(const ParameterVector& p) {
  return {{"layout", describe_layout(p.layout)}, {"values", p.values}};
}

inline ParameterVector params_from_json(const nlohmann::json& j) {
  return ParameterVector(parse_layout(j.at("layout").get<std::string>()),
                         j.at("values").get<std::vector<double>>());
}

template <typename T>
void field_to_json(nlohmann::json& j, std::string_view name, const T& v) {
  if constexpr (std::is_same_v<T, ParameterVector>)
    j[std::string(name)] = params_to_json(v);
  else
    j[std::string(name)] = v;
}

template <typename T>
void field_from_json(const nlohmann::json& j, std::string_view name, T& v) {
  const auto& node = j.at(std::string(name));
  if constexpr (std::is_same_v<T, ParameterVector>)
    v = params_from_json(node);
  else
    v = node.get<T>();
}

}  // namespace detail

/// Wire encoding: one JSON object whose keys are exactly the schema fields.
template <typename Message>
std::string encode_message(const Message& m) {
  nlohmann::json j;
  Message::for_each_field(m, [&](std::string_view name, FieldRole, const auto& v) {
    detail::field_to_json(j, name, v);
  });
  return j.dump();
}

template <typename Message>
Message decode_message(std::string_view wire) {
  const auto j = nlohmann::json::parse(wire);
  std::size_t expected = 0;
  Message m{};
  Message::for_each_field(m, [&](std::string_view name, FieldRole, auto& v) {
    ++expected;
    detail::field_from_json(j, name, v);
  });
  if (j.size() != expected) throw ProtocolError("message carries unexpected fields");
  return m;
}

/// In-process message bus. Messages cross it only in wire form, and the
/// server drains updates in client_id order, so delivery order is fixed.
class InProcessTransport {
 public:
  void send_params(const std::string& client_id, const GlobalModelMessage& msg) {
    auto wire = encode_message(msg);
    bytes_ += wire.size();
    to_clients_[client_id].push_back(std::move(wire));
  }

  GlobalModelMessage recv_params(const std::string& client_id) {
    auto it = to_clients_.find(client_id);
    if (it == to_clients_.end() || it->second.empty())
      throw ProtocolError("no global model pending for client '" + client_id + "'");
    auto msg = decode_message<GlobalModelMessage>(it->second.front());
    it->second.pop_front();
    return msg;
  }

  void send_update(const ClientUpdate& update) {
    auto wire = encode_message(update);
    bytes_ += wire.size();
    to_server_.emplace(update.client_id, std::move(wire));
  }

  /// All pending updates, sorted by client_id.
  std::vector<ClientUpdate> recv_updates() {
    std::vector<ClientUpdate> out;
    for (const auto& [id, wire] : to_server_) out.push_back(decode_message<ClientUpdate>(wire));
    to_server_.clear();
    return out;
  }

  std::size_t bytes_sent() const { return bytes_; }

 private:
  std::map<std::string, std::deque<std::string>> to_clients_;
  std::multimap<std::string, std::string> to_server_;
  std::size_t bytes_ = 0;
};

}  // namespace fedstone
