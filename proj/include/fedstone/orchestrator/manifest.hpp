#pragma once

#include <string>

#include <json.hpp>

#include "fedstone/config.hpp"
#include "fedstone/corruption/corruption.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/io.hpp"
#include "fedstone/orchestrator/experiment.hpp"
#include "fedstone/random.hpp"

// Run manifests are JSON documents sealed with "manifest_hash", the FNV-1a
// digest of the document's canonical dump without that key. Any edit to a
// sealed manifest invalidates it.

namespace fedstone {

inline constexpr const char* kRunManifestFormat = "fedstone-run-manifest/1";

inline std::string content_hash(nlohmann::json j) {
  j.erase("manifest_hash");
  return hex64(fnv1a(j.dump()));
}

inline nlohmann::json seal(nlohmann::json j) {
  j["manifest_hash"] = content_hash(j);
  return j;
}

/// Throws ProvenanceError unless `j` is a sealed manifest whose hash matches
/// its content.
inline void verify_seal(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("manifest_hash") || !j["manifest_hash"].is_string())
    throw ProvenanceError("manifest is not sealed");
  if (j.value("format", "") != kRunManifestFormat)
    throw ProvenanceError("unknown manifest format");
  const std::string expected = content_hash(j);
  if (j["manifest_hash"].get<std::string>() != expected)
    throw ProvenanceError("manifest hash mismatch: recorded " +
                          j["manifest_hash"].get<std::string>() + ", content hashes to " +
                          expected);
}

inline nlohmann::json grid_to_json(const AccuracyMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.n_e_values.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.n_r_values.size(); ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return {{"n_e", m.n_e_values}, {"n_r", m.n_r_values}, {"accuracy", rows}};
}

inline nlohmann::json seeds_json(const RunConfig& config, const ExperimentSetup& setup) {
  return {{"root", config.seed},
          {"generate_A", setup.generation_seed(Source::kA)},
          {"generate_B", setup.generation_seed(Source::kB)},
          {"partition", setup.partition_seed()},
          {"good_corrupted", setup.split_seed()},
          {"init", setup.init_seed()},
          {"corruption", config.corruption_seed}};
}

/// The effective config without its output location, which does not affect
/// results.
inline nlohmann::json recorded_config(const RunConfig& config) {
  nlohmann::json j = to_json(config);
  j.erase("output_dir");
  return j;
}

inline nlohmann::json lpo_manifest(const RunConfig& config, const GridResult& grid,
                                   const nlohmann::json& datasets, const std::string& grid_csv) {
  const ExperimentSetup setup = config.setup();
  const auto& stats = setup.train.stats;
  nlohmann::json j{
      {"format", kRunManifestFormat},
      {"stage", "lpo"},
      {"config_hash", config_hash(config)},
      {"config", recorded_config(config)},
      {"seeds", seeds_json(config, setup)},
      {"severity_tables", {{"version", release_tables().version},
                           {"hash", hex64(tables_hash(release_tables()))}}},
      {"normalization", {{"mean", stats.mean}, {"std", stats.std}}},
      {"datasets", datasets},
      {"grid", grid_to_json(grid.accuracy)},
      {"grid_csv_hash", hex64(fnv1a(grid_csv))},
      {"best", {{"n_e", grid.best.n_e}, {"n_r", grid.best.n_r}}},
      {"best_accuracy", grid.best_accuracy},
  };
  return seal(std::move(j));
}

/// Checks an LPO manifest against the current configuration and returns the
/// optimum it selected.
inline GridCell optimum_from_manifest(const nlohmann::json& manifest, const RunConfig& config) {
  verify_seal(manifest);
  if (manifest.value("stage", "") != "lpo")
    throw ProvenanceError("manifest is not an LPO manifest");
  const std::string expected = config_hash(config);
  if (manifest.value("config_hash", "") != expected)
    throw ProvenanceError("LPO manifest was produced by config " +
                          manifest.value("config_hash", std::string("<none>")) +
                          ", current config hashes to " + expected);
  GridCell best{manifest.at("best").at("n_e").get<int>(), manifest.at("best").at("n_r").get<int>()};
  AccuracyMatrix m;
  m.n_e_values = manifest.at("grid").at("n_e").get<std::vector<int>>();
  m.n_r_values = manifest.at("grid").at("n_r").get<std::vector<int>>();
  for (const auto& row : manifest.at("grid").at("accuracy"))
    for (const auto& v : row) m.values.push_back(v.get<double>());
  if (!(select_optimal(m) == best))
    throw ProvenanceError("manifest optimum is not the argmax of its own grid");
  return best;
}

inline nlohmann::json frv_manifest(const RunConfig& config, const nlohmann::json& lpo,
                                   const FrvResult& result, const std::string& final_ckpt_hash) {
  nlohmann::json clients = result.clients;
  nlohmann::json j{
      {"format", kRunManifestFormat},
      {"stage", "frv"},
      {"config_hash", config_hash(config)},
      {"lpo_manifest_hash", lpo.at("manifest_hash")},
      {"applied", {{"n_e", result.applied.n_e}, {"n_r", result.applied.n_r}}},
      {"clients", clients},
      {"corruption_seed", config.corruption_seed},
      {"fixed_severity", config.fixed_severity ? nlohmann::json(*config.fixed_severity)
                                               : nlohmann::json(nullptr)},
      {"severity_tables", {{"version", release_tables().version},
                           {"hash", hex64(tables_hash(release_tables()))}}},
      {"warm_start", config.pretrain.enabled},
      {"final_accuracy", result.final_accuracy},
      {"final_checkpoint_hash", final_ckpt_hash},
  };
  return seal(std::move(j));
}

}  // namespace fedstone
