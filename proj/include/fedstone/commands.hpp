#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedstone/fedstone.hpp"

// Implementations of the `fedstone` subcommands. Each returns a process exit
// status and writes diagnostics to `err`.

namespace fedstone::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidConfig = 2,
  kProvenance = 3,
  kBadInput = 4,
};

struct CommonOptions {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

inline RunConfig effective_config(const CommonOptions& o) {
  RunConfig c = load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = o.out->string();
  validate(c);
  return c;
}

namespace detail {

inline std::string jsonl(const std::vector<RoundRecord>& records) {
  std::string out;
  for (const auto& r : records) out += round_log_line(r) + "\n";
  return out;
}

inline std::string timing(const std::vector<RoundRecord>& records) {
  std::string out;
  for (const auto& r : records) out += timing_line(r) + "\n";
  return out;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const ProvenanceError& e) {
    err << "provenance error: " << e.what() << "\n";
    return kProvenance;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

inline std::vector<ClientData> configured_clients(const RunConfig& c, const ExperimentSetup& setup) {
  std::vector<ClientData> clients;
  for (const auto& name : c.clients)
    clients.push_back(client_from(name, build_partition(setup, parse_source(name))));
  return clients;
}

inline nlohmann::json write_dataset_manifests(const std::filesystem::path& dir,
                                              const ExperimentSetup& setup) {
  nlohmann::json out = nlohmann::json::object();
  for (Source s : {Source::kA, Source::kB}) {
    const auto text =
        format_manifest(manifest_for(build_partition(setup, s), setup.generation_seed(s),
                                     setup.geometry));
    const std::string name = std::string(to_string(s)) + ".manifest";
    write_file_atomic(dir / name, text);
    out[std::string(to_string(s))] = {{"path", "datasets/" + name},
                                      {"hash", hex64(fnv1a(text))}};
  }
  return out;
}

inline std::string format_grid_partial(const AccuracyMatrix& m, const std::vector<bool>& done) {
  std::string out = "n_e\\n_r";
  for (int r : m.n_r_values) out += "," + std::to_string(r);
  out += "\n";
  for (std::size_t i = 0; i < m.n_e_values.size(); ++i) {
    out += std::to_string(m.n_e_values[i]);
    for (std::size_t j = 0; j < m.n_r_values.size(); ++j)
      out += "," + (done[i * m.n_r_values.size() + j] ? format_double(m.at(i, j)) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace detail

/// Stage 1. Writes <out>/lpo/{grid.csv, manifest.json, cells/*.jsonl,
/// timing.jsonl} and <out>/datasets/{A,B}.manifest.
inline int cmd_lpo(const CommonOptions& opts, bool grid_full, std::ostream& out,
                   std::ostream& err) {
  return detail::guarded(err, [&] {
    RunConfig config = effective_config(opts);
    if (grid_full) config.grid_full = true;
    const ExperimentSetup setup = config.setup();
    const GridSpec grid = config.effective_grid();
    const std::filesystem::path root(config.output_dir);
    const std::filesystem::path dir = root / "lpo";
    std::filesystem::create_directories(dir / "cells");

    const nlohmann::json datasets = detail::write_dataset_manifests(root / "datasets", setup);

    LpoOptions lpo;
    lpo.warm_start = pretrain_source(config.pretrain, setup);
    AccuracyMatrix partial{grid.n_e_values, grid.n_r_values,
                           std::vector<double>(grid.n_e_values.size() * grid.n_r_values.size())};
    std::vector<bool> done(partial.values.size(), false);
    lpo.on_cell = [&](const GridCell& cell, double acc) {
      for (std::size_t i = 0; i < grid.n_e_values.size(); ++i)
        for (std::size_t j = 0; j < grid.n_r_values.size(); ++j)
          if (grid.n_e_values[i] == cell.n_e && grid.n_r_values[j] == cell.n_r) {
            partial.at(i, j) = acc;
            done[i * grid.n_r_values.size() + j] = true;
          }
      write_file_atomic(dir / "grid.partial.csv", detail::format_grid_partial(partial, done));
      err << "cell n_e=" << cell.n_e << " n_r=" << cell.n_r << " accuracy=" << acc << "\n";
    };

    const GridResult result = run_lpo(setup, grid, lpo);
    std::string timing;
    for (const auto& [key, records] : result.cell_records) {
      const std::string name =
          "ne" + std::to_string(key.first) + "_nr" + std::to_string(key.second) + ".jsonl";
      write_file_atomic(dir / "cells" / name, detail::jsonl(records));
      for (const auto& r : records)
        timing += nlohmann::json{{"n_e", key.first}, {"n_r", key.second},
                                 {"round_index", r.round_index}, {"wall_time", r.wall_time}}
                      .dump() +
                  "\n";
    }
    write_file_atomic(dir / "timing.jsonl", timing);
    const std::string csv = format_grid_csv(result.accuracy);
    write_file_atomic(dir / "grid.csv", csv);
    write_file_atomic(dir / "manifest.json", lpo_manifest(config, result, datasets, csv).dump(2) + "\n");
    std::filesystem::remove(dir / "grid.partial.csv");
    out << "best: n_e=" << result.best.n_e << " n_r=" << result.best.n_r
        << " accuracy=" << format_double(result.best_accuracy) << "\n";
    return int{kOk};
  });
}

/// Stage 2. Requires the LPO manifest produced with the same config.
inline int cmd_frv(const CommonOptions& opts, const std::filesystem::path& lpo_manifest_path,
                   std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const RunConfig config = effective_config(opts);
    if (lpo_manifest_path.empty()) throw ConfigError("an LPO manifest is required (--lpo-manifest)");
    if (!std::filesystem::exists(lpo_manifest_path))
      throw ConfigError("LPO manifest '" + lpo_manifest_path.string() + "' does not exist");
    nlohmann::json lpo;
    try {
      lpo = nlohmann::json::parse(read_file(lpo_manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ProvenanceError(std::string("LPO manifest is not valid JSON: ") + e.what());
    }
    const GridCell optimum = optimum_from_manifest(lpo, config);
    const ExperimentSetup setup = config.setup();
    const std::filesystem::path dir = std::filesystem::path(config.output_dir) / "frv";
    std::filesystem::create_directories(dir);

    FrvOptions frv;
    frv.corruption_seed = config.corruption_seed;
    frv.fixed_severity = config.fixed_severity;
    frv.warm_start = pretrain_source(config.pretrain, setup);
    const FrvResult result =
        run_frv(setup, optimum, frv, [&](const RoundRecord& r, const ParameterVector& p) {
          save_checkpoint(dir / ("round_" + std::to_string(r.round_index) + ".ckpt"), p);
        });
    write_file_atomic(dir / "rounds.jsonl", detail::jsonl(result.round_records));
    write_file_atomic(dir / "timing.jsonl", detail::timing(result.round_records));
    const std::string ckpt = encode_checkpoint(result.final_params);
    write_file_atomic(dir / "final.ckpt", ckpt);
    write_file_atomic(dir / "result.json",
                      frv_manifest(config, lpo, result, hex64(fnv1a(ckpt))).dump(2) + "\n");
    out << "applied: n_e=" << optimum.n_e << " n_r=" << optimum.n_r << "\n";
    out << "final accuracy: " << format_double(result.final_accuracy) << "\n";
    return int{kOk};
  });
}

struct CorruptOptions {
  std::filesystem::path manifest;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<int> severity;
  bool emit_grid = false;
  bool print_tables = false;
};

/// Corrupts every record of a dataset manifest; optionally prints the
/// severity tables or writes a contact sheet of all kinds.
inline int cmd_corrupt(const CorruptOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (o.print_tables) {
      out << format_tables(release_tables());
      if (o.manifest.empty()) return int{kOk};
    }
    if (o.manifest.empty()) throw InputError("an input manifest is required (--manifest)");
    if (o.severity) CorruptionSpec{CorruptionKind::kGaussianNoise, *o.severity}.validate();
    const DatasetManifest in = parse_manifest(read_file(o.manifest));
    if (in.records.empty()) throw InputError("input manifest has no records");
    const auto clean = materialize(in);
    const auto corrupted = corrupt_dataset(clean, o.seed, release_tables(), o.severity);

    DatasetManifest result{in.geometry, in.records, o.seed, release_tables().version};
    for (std::size_t i = 0; i < corrupted.size(); ++i)
      result.records[i].corruption = corrupted[i].corruption;
    const std::filesystem::path dir = o.out.empty() ? std::filesystem::path(".") : o.out;
    write_file_atomic(dir / "corrupted.manifest", format_manifest(result));
    if (o.emit_grid) {
      const int level = o.severity.value_or(3);
      const Image sheet = contact_sheet(clean.front().image, level, o.seed);
      write_file_atomic(dir / ("contact_sheet_s" + std::to_string(level) + ".ppm"),
                        encode_ppm(sheet));
    }
    out << "corrupted " << corrupted.size() << " samples -> " << (dir / "corrupted.manifest").string()
        << "\n";
    return int{kOk};
  });
}

/// Single run for debugging: a federation over the configured clients, or
/// centralized training on their pooled training sets.
inline int cmd_train(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const RunConfig config = effective_config(opts);
    const ExperimentSetup setup = config.setup();
    const std::filesystem::path dir = std::filesystem::path(config.output_dir) / "train";
    std::filesystem::create_directories(dir);

    const auto clients = detail::configured_clients(config, setup);
    const PreparedEvalSet eval = prepare_eval_set(union_test_set(clients), setup.train.stats);
    const ParameterVector initial =
        init_global(setup.model(), setup.init_seed(), pretrain_source(config.pretrain, setup));
    const FederationConfig fed = setup.federation(config.local_epochs, config.n_rounds);

    ParameterVector final_params;
    std::vector<RoundRecord> records;
    if (config.mode == TrainMode::kFederated) {
      auto result = run_federation(fed, clients, eval, initial,
                                   [&](const RoundRecord& r, const ParameterVector& p) {
                                     save_checkpoint(
                                         dir / ("round_" + std::to_string(r.round_index) + ".ckpt"), p);
                                   });
      final_params = std::move(result.params);
      records = std::move(result.records);
    } else {
      std::vector<LabeledSample> pooled;
      std::string trainer_id;
      for (const auto& c : clients) {
        pooled.insert(pooled.end(), c.train.begin(), c.train.end());
        trainer_id += (trainer_id.empty() ? "" : "+") + c.id;
      }
      final_params = train_centralized(fed.train, initial, pooled, trainer_id, config.n_rounds,
                                       config.local_epochs, fed.seed);
      const Evaluation ev = evaluate_global(fed.train.model, final_params, eval);
      RoundRecord r;
      r.round_index = static_cast<std::uint64_t>(config.n_rounds);
      r.per_client.push_back({trainer_id, 0.0, pooled.size(), 0.0});
      r.global_accuracy = ev.accuracy;
      r.global_loss = ev.loss;
      r.per_class_accuracy = ev.per_class_accuracy;
      records.push_back(r);
    }
    write_file_atomic(dir / "rounds.jsonl", detail::jsonl(records));
    write_file_atomic(dir / "timing.jsonl", detail::timing(records));
    save_checkpoint(dir / "final.ckpt", final_params);
    out << "final accuracy: " << format_double(records.back().global_accuracy) << "\n";
    return int{kOk};
  });
}

/// Evaluates a checkpoint on the union of the configured clients' test sets.
inline int cmd_eval(const CommonOptions& opts, const std::filesystem::path& checkpoint,
                    std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const RunConfig config = effective_config(opts);
    if (checkpoint.empty()) throw InputError("a checkpoint is required (--checkpoint)");
    const ExperimentSetup setup = config.setup();
    const ParameterVector params = load_checkpoint(checkpoint);
    const auto clients = detail::configured_clients(config, setup);
    const Evaluation ev = evaluate_global(setup.model(), params, union_test_set(clients),
                                          setup.train.stats);
    nlohmann::json j{{"accuracy", ev.accuracy},
                     {"loss", ev.loss},
                     {"per_class_accuracy", ev.per_class_accuracy},
                     {"per_class_count", ev.per_class_count}};
    out << j.dump() << "\n";
    return int{kOk};
  });
}

}  // namespace fedstone::cli
