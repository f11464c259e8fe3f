#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedstone/errors.hpp"
#include "fedstone/io.hpp"
#include "fedstone/orchestrator/experiment.hpp"
#include "fedstone/random.hpp"

// Run configuration, a single JSON document. Every key is optional and
// defaults to the values below; unknown keys are rejected.
//
//   {
//     "config_version": 1,
//     "seed": 0,
//     "output_dir": "fedstone-out",
//     "model":      {"hidden_dims": [64], "activation": "relu"},
//     "data":       {"patch_size": 32, "channels": 3, "patches_per_class": 2000,
//                    "per_class_test": 200, "validation_fraction": 0.1,
//                    "patches_per_image": null},
//     "optimizer":  {"learning_rate": 1e-4, "beta1": 0.9, "beta2": 0.999,
//                    "epsilon": 1e-8, "weight_decay": 1e-5,
//                    "decoupled_weight_decay": false},
//     "federation": {"n_rounds": 10, "local_epochs": 7, "batch_size": 4,
//                    "aggregation": "examples" | "uniform",
//                    "clients": ["A", "B"], "mode": "federated" | "centralized"},
//     "grid":       {"n_e": [1, 2, 4, 7, 10], "n_r": [1, 2, 4, 7, 10], "full": false},
//     "frv":        {"corruption_seed": 1, "fixed_severity": null},
//     "pretrain":   {"enabled": false, "epochs": 1, "patches_per_class": 500,
//                    "reset_head": true}
//   }

namespace fedstone {

inline constexpr int kConfigVersion = 1;

enum class TrainMode { kFederated, kCentralized };

struct RunConfig {
  int config_version = kConfigVersion;
  std::uint64_t seed = 0;
  std::string output_dir = "fedstone-out";

  std::vector<std::size_t> hidden_dims{64};

  std::size_t patch_size = 32;
  std::size_t channels = 3;
  int patches_per_class = 2000;
  int per_class_test = 200;
  double validation_fraction = 0.10;
  std::optional<int> patches_per_image;  // reserved for a real-image loader

  AdamHyper optimizer;

  int n_rounds = 10;
  int local_epochs = 7;
  std::size_t batch_size = 4;
  AggregationWeighting aggregation = AggregationWeighting::kExampleCount;
  std::vector<std::string> clients{"A", "B"};
  TrainMode mode = TrainMode::kFederated;

  GridSpec grid;
  bool grid_full = false;

  std::uint64_t corruption_seed = 1;
  std::optional<int> fixed_severity;

  PretrainSpec pretrain;

  ExperimentSetup setup() const {
    ExperimentSetup s;
    s.geometry = {patch_size, patch_size, channels};
    s.patches_per_class = patches_per_class;
    s.per_class_test = per_class_test;
    s.validation_fraction = validation_fraction;
    s.train.model.hidden_dims = hidden_dims;
    s.train.model.input_dim = s.geometry.numel();
    s.train.model.num_classes = kNumClasses;
    s.train.optimizer = optimizer;
    s.train.batch_size = batch_size;
    s.train.stats = default_stats(channels);
    s.aggregation = aggregation;
    s.seed = seed;
    return s;
  }

  GridSpec effective_grid() const { return grid_full ? GridSpec::full() : grid; }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  ~ConfigReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) fail(join(key), "is not a recognised key");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& node = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!node.is_number()) throw std::invalid_argument("number expected");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!node.is_boolean()) throw std::invalid_argument("boolean expected");
      } else if constexpr (std::is_integral_v<T>) {
        if (!node.is_number_integer()) throw std::invalid_argument("integer expected");
        if constexpr (std::is_unsigned_v<T>)
          if (node.is_number_integer() && node.get<long long>() < 0 && !node.is_number_unsigned())
            throw std::invalid_argument("must be non-negative");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!node.is_string()) throw std::invalid_argument("string expected");
      }
      out = node.get<T>();
    } catch (const std::exception& e) {
      fail(join(key), e.what());
    }
  }

  template <typename T>
  void get_list(const std::string& key, std::vector<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& node = j_.at(key);
    if (!node.is_array()) fail(join(key), "list expected");
    std::vector<T> values;
    for (std::size_t i = 0; i < node.size(); ++i) {
      const auto& item = node[i];
      const std::string where = join(key) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_integral_v<T>) {
        if (!item.is_number_integer()) fail(where, "integer expected");
        if constexpr (std::is_unsigned_v<T>)
          if (item.get<long long>() < 0 && !item.is_number_unsigned())
            fail(where, "must be non-negative");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!item.is_string()) fail(where, "string expected");
      }
      values.push_back(item.get<T>());
    }
    out = std::move(values);
  }

  template <typename T>
  void get_optional(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  ConfigReader section(const std::string& key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return ConfigReader(j_.contains(key) ? j_.at(key) : empty, join(key));
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config field '" + path + "': " + what);
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Re-checks every invariant the modules rely on and reports the offending
/// field path, so that no invalid configuration reaches module code.
inline void validate(const RunConfig& c) {
  using detail::ConfigReader;
  auto fail = [](const char* path, const std::string& what) { ConfigReader::fail(path, what); };
  if (c.config_version != kConfigVersion)
    fail("config_version", "unsupported version " + std::to_string(c.config_version));
  if (c.output_dir.empty()) fail("output_dir", "must not be empty");
  if (c.patch_size < 1) fail("data.patch_size", "must be >= 1");
  if (c.channels < 1) fail("data.channels", "must be >= 1");
  for (std::size_t h : c.hidden_dims)
    if (h < 1) fail("model.hidden_dims", "layer widths must be >= 1");
  // The global model is scored on the test splits, so they may not be empty.
  if (c.per_class_test < 1) fail("data.per_class_test", "must be >= 1");
  if (c.patches_per_class < 1) fail("data.patches_per_class", "must be >= 1");
  if (c.patches_per_class <= c.per_class_test)
    fail("data.patches_per_class", "must exceed data.per_class_test");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0))
    fail("data.validation_fraction", "must lie in [0, 1)");
  if (c.patches_per_image && *c.patches_per_image < 1)
    fail("data.patches_per_image", "must be >= 1");
  if (!(c.optimizer.learning_rate > 0.0)) fail("optimizer.learning_rate", "must be > 0");
  if (!(c.optimizer.beta1 >= 0.0 && c.optimizer.beta1 < 1.0))
    fail("optimizer.beta1", "must lie in [0, 1)");
  if (!(c.optimizer.beta2 >= 0.0 && c.optimizer.beta2 < 1.0))
    fail("optimizer.beta2", "must lie in [0, 1)");
  if (!(c.optimizer.epsilon > 0.0)) fail("optimizer.epsilon", "must be > 0");
  if (!(c.optimizer.weight_decay >= 0.0)) fail("optimizer.weight_decay", "must be >= 0");
  if (c.n_rounds < 1) fail("federation.n_rounds", "must be >= 1");
  if (c.local_epochs < 1) fail("federation.local_epochs", "must be >= 1");
  if (c.batch_size < 1) fail("federation.batch_size", "must be >= 1");
  if (c.clients.empty()) fail("federation.clients", "must name at least one dataset");
  {
    std::set<std::string> seen;
    for (const auto& name : c.clients) {
      if (name != "A" && name != "B") fail("federation.clients", "unknown dataset '" + name + "'");
      if (!seen.insert(name).second)
        fail("federation.clients", "dataset '" + name + "' bound twice");
    }
  }
  if (c.grid.n_e_values.empty()) fail("grid.n_e", "must not be empty");
  if (c.grid.n_r_values.empty()) fail("grid.n_r", "must not be empty");
  for (int v : c.grid.n_e_values)
    if (v < 1) fail("grid.n_e", "values must be >= 1, got " + std::to_string(v));
  for (int v : c.grid.n_r_values)
    if (v < 1) fail("grid.n_r", "values must be >= 1, got " + std::to_string(v));
  if (c.fixed_severity && (*c.fixed_severity < kMinSeverity || *c.fixed_severity > kMaxSeverity))
    fail("frv.fixed_severity", "must lie in [1, 5]");
  if (c.pretrain.epochs < 0) fail("pretrain.epochs", "must be >= 0");
  if (c.pretrain.patches_per_class < 1) fail("pretrain.patches_per_class", "must be >= 1");
}

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  {
    detail::ConfigReader root(j, "");
    root.get("config_version", c.config_version);
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    {
      auto m = root.section("model");
      m.get_list("hidden_dims", c.hidden_dims);
      std::string act = "relu";
      m.get("activation", act);
      if (act != "relu") detail::ConfigReader::fail("model.activation", "only 'relu' is supported");
    }
    {
      auto d = root.section("data");
      d.get("patch_size", c.patch_size);
      d.get("channels", c.channels);
      d.get("patches_per_class", c.patches_per_class);
      d.get("per_class_test", c.per_class_test);
      d.get("validation_fraction", c.validation_fraction);
      d.get_optional("patches_per_image", c.patches_per_image);
    }
    {
      auto o = root.section("optimizer");
      o.get("learning_rate", c.optimizer.learning_rate);
      o.get("beta1", c.optimizer.beta1);
      o.get("beta2", c.optimizer.beta2);
      o.get("epsilon", c.optimizer.epsilon);
      o.get("weight_decay", c.optimizer.weight_decay);
      o.get("decoupled_weight_decay", c.optimizer.decoupled_weight_decay);
    }
    {
      auto f = root.section("federation");
      f.get("n_rounds", c.n_rounds);
      f.get("local_epochs", c.local_epochs);
      f.get("batch_size", c.batch_size);
      std::string agg = "examples";
      f.get("aggregation", agg);
      if (agg == "examples") c.aggregation = AggregationWeighting::kExampleCount;
      else if (agg == "uniform") c.aggregation = AggregationWeighting::kUniform;
      else detail::ConfigReader::fail("federation.aggregation", "expected 'examples' or 'uniform'");
      f.get_list("clients", c.clients);
      std::string mode = "federated";
      f.get("mode", mode);
      if (mode == "federated") c.mode = TrainMode::kFederated;
      else if (mode == "centralized") c.mode = TrainMode::kCentralized;
      else detail::ConfigReader::fail("federation.mode", "expected 'federated' or 'centralized'");
    }
    {
      auto g = root.section("grid");
      g.get_list("n_e", c.grid.n_e_values);
      g.get_list("n_r", c.grid.n_r_values);
      g.get("full", c.grid_full);
    }
    {
      auto r = root.section("frv");
      r.get("corruption_seed", c.corruption_seed);
      r.get_optional("fixed_severity", c.fixed_severity);
    }
    {
      auto p = root.section("pretrain");
      p.get("enabled", c.pretrain.enabled);
      p.get("epochs", c.pretrain.epochs);
      p.get("patches_per_class", c.pretrain.patches_per_class);
      p.get("reset_head", c.pretrain.reset_head);
    }
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("config '" + path.string() + "' does not exist");
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Canonical form of the effective configuration (sorted keys, every field
/// present). Its hash identifies a run.
inline nlohmann::json to_json(const RunConfig& c) {
  auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
  return {
      {"config_version", c.config_version},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"model", {{"hidden_dims", c.hidden_dims}, {"activation", "relu"}}},
      {"data",
       {{"patch_size", c.patch_size},
        {"channels", c.channels},
        {"patches_per_class", c.patches_per_class},
        {"per_class_test", c.per_class_test},
        {"validation_fraction", c.validation_fraction},
        {"patches_per_image", opt(c.patches_per_image)}}},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon},
        {"weight_decay", c.optimizer.weight_decay},
        {"decoupled_weight_decay", c.optimizer.decoupled_weight_decay}}},
      {"federation",
       {{"n_rounds", c.n_rounds},
        {"local_epochs", c.local_epochs},
        {"batch_size", c.batch_size},
        {"aggregation",
         c.aggregation == AggregationWeighting::kExampleCount ? "examples" : "uniform"},
        {"clients", c.clients},
        {"mode", c.mode == TrainMode::kFederated ? "federated" : "centralized"}}},
      {"grid", {{"n_e", c.grid.n_e_values}, {"n_r", c.grid.n_r_values}, {"full", c.grid_full}}},
      {"frv", {{"corruption_seed", c.corruption_seed}, {"fixed_severity", opt(c.fixed_severity)}}},
      {"pretrain",
       {{"enabled", c.pretrain.enabled},
        {"epochs", c.pretrain.epochs},
        {"patches_per_class", c.pretrain.patches_per_class},
        {"reset_head", c.pretrain.reset_head}}},
  };
}

/// Hash of the canonical config. `output_dir` is excluded: where results
/// land does not change what they are.
inline std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return hex64(fnv1a(j.dump()));
}

}  // namespace fedstone
