// fedstone: command-line driver for the two-stage federated experiment.
//
//   fedstone lpo     --config run.json [--seed N] [--out DIR] [--grid-full]
//   fedstone frv     --config run.json --lpo-manifest DIR/lpo/manifest.json
//   fedstone corrupt --manifest in.manifest --seed N --out DIR
//                    [--severity K] [--emit-grid] [--print-tables]
//   fedstone train   --config run.json
//   fedstone eval    --config run.json --checkpoint final.ckpt

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedstone/commands.hpp"

namespace {

void add_common(CLI::App* cmd, fedstone::cli::CommonOptions& o, std::optional<std::uint64_t>& seed,
                std::string& out) {
  cmd->add_option("--config", o.config_path, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", seed, "Override the root seed");
  cmd->add_option("--out", out, "Override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fedstone::cli;
  CLI::App app{"Federated learning simulator and corruption-robustness harness"};
  app.require_subcommand(1);

  CommonOptions common;
  std::optional<std::uint64_t> seed;
  std::string out;

  auto* lpo = app.add_subcommand("lpo", "Epochs x rounds grid search on clean two-client data");
  add_common(lpo, common, seed, out);
  bool grid_full = false;
  lpo->add_flag("--grid-full", grid_full, "Run the full 10x10 grid");

  auto* frv = app.add_subcommand("frv", "Robustness run with good and corrupted clients");
  add_common(frv, common, seed, out);
  std::string lpo_manifest;
  frv->add_option("--lpo-manifest", lpo_manifest, "Manifest written by `fedstone lpo`")->required();

  auto* corrupt = app.add_subcommand("corrupt", "Corrupt a dataset manifest");
  CorruptOptions co;
  std::string co_manifest, co_out;
  corrupt->add_option("--manifest", co_manifest, "Input dataset manifest");
  corrupt->add_option("--seed", co.seed, "Corruption seed");
  corrupt->add_option("--out", co_out, "Output directory");
  corrupt->add_option("--severity", co.severity, "Pin the severity level (1-5)");
  corrupt->add_flag("--emit-grid", co.emit_grid, "Write a contact sheet of every kind");
  corrupt->add_flag("--print-tables", co.print_tables, "Print the severity tables");

  auto* train = app.add_subcommand("train", "Single federated or centralized run");
  add_common(train, common, seed, out);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured test sets");
  add_common(eval, common, seed, out);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();

  CLI11_PARSE(app, argc, argv);

  common.seed = seed;
  if (!out.empty()) common.out = out;

  if (*lpo) return cmd_lpo(common, grid_full, std::cout, std::cerr);
  if (*frv) return cmd_frv(common, lpo_manifest, std::cout, std::cerr);
  if (*corrupt) {
    co.manifest = co_manifest;
    co.out = co_out;
    return cmd_corrupt(co, std::cout, std::cerr);
  }
  if (*train) return cmd_train(common, std::cout, std::cerr);
  if (*eval) return cmd_eval(common, checkpoint, std::cout, std::cerr);
  return kFailure;
}
