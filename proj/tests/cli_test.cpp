#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fedstone/commands.hpp"

namespace fedstone {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("fedstone-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

nlohmann::json tiny_config_json(const fs::path& out) {
  return {{"config_version", 1},
          {"seed", 4},
          {"output_dir", out.string()},
          {"model", {{"hidden_dims", {8}}}},
          {"data", {{"patch_size", 8}, {"patches_per_class", 24}, {"per_class_test", 4}}},
          {"optimizer", {{"learning_rate", 1e-3}}},
          {"federation", {{"n_rounds", 2}, {"local_epochs", 1}}},
          {"grid", {{"n_e", {1, 2}}, {"n_r", {1, 3}}}}};
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  write_file_atomic(p, j.dump(2));
  return p;
}

std::string config_error(const nlohmann::json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsFollowThePublishedSetup) {
  const RunConfig c = parse_config(nlohmann::json::object());
  EXPECT_EQ(c.optimizer.learning_rate, 1e-4);
  EXPECT_EQ(c.optimizer.weight_decay, 1e-5);
  EXPECT_EQ(c.batch_size, 4u);
  EXPECT_EQ(c.local_epochs, 7);
  EXPECT_EQ(c.n_rounds, 10);
  EXPECT_EQ(c.per_class_test, 200);
  EXPECT_EQ(c.patches_per_class, 2000);
  EXPECT_EQ(c.grid.n_e_values, (std::vector<int>{1, 2, 4, 7, 10}));
  EXPECT_EQ(c.aggregation, AggregationWeighting::kExampleCount);
  EXPECT_FALSE(c.optimizer.decoupled_weight_decay);
}

TEST(Config, ErrorsNameTheFieldPath) {
  EXPECT_NE(config_error({{"grid", {{"n_e", {1, 0, 3}}}}}).find("grid.n_e"), std::string::npos);
  EXPECT_NE(config_error({{"federation", {{"n_rounds", 0}}}}).find("federation.n_rounds"), std::string::npos);
  EXPECT_NE(config_error({{"optimizer", {{"learning_rat", 0.1}}}}).find("optimizer.learning_rat"),
            std::string::npos);
  EXPECT_NE(config_error({{"optimizer", {{"learning_rate", "fast"}}}}).find("optimizer.learning_rate"),
            std::string::npos);
  EXPECT_NE(config_error({{"config_version", 2}}).find("config_version"), std::string::npos);
  EXPECT_NE(config_error({{"frv", {{"fixed_severity", 6}}}}).find("frv.fixed_severity"), std::string::npos);
  EXPECT_NE(config_error({{"federation", {{"clients", {"A", "A"}}}}}).find("federation.clients"),
            std::string::npos);
  EXPECT_NE(config_error({{"model", {{"hidden_dims", {8, 0}}}}}).find("model.hidden_dims"), std::string::npos);
  EXPECT_NE(config_error({{"data", {{"patches_per_class", 100}, {"per_class_test", 100}}}})
                .find("data.patches_per_class"),
            std::string::npos);
  EXPECT_NE(config_error({{"pretrain", {{"epochs", -1}}}}).find("pretrain.epochs"), std::string::npos);
}

TEST(Config, CanonicalFormRoundTripsAndHashIgnoresOutputDir) {
  const RunConfig c = parse_config(tiny_config_json("/tmp/x"));
  const RunConfig back = parse_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  RunConfig moved = c;
  moved.output_dir = "/tmp/y";
  EXPECT_EQ(config_hash(moved), config_hash(c));
  moved.seed = 5;
  EXPECT_NE(config_hash(moved), config_hash(c));
}

TEST(Commands, LpoThenFrvProducesLinkedArtifacts) {
  TempDir tmp;
  const fs::path out = tmp.path() / "nested" / "run";
  const cli::CommonOptions opts{write_config(tmp.path(), tiny_config_json(out)), {}, {}};
  std::ostringstream so, se;
  ASSERT_EQ(cli::cmd_lpo(opts, false, so, se), cli::kOk) << se.str();
  EXPECT_NE(so.str().find("best: n_e="), std::string::npos);
  const std::string csv = read_file(out / "lpo" / "grid.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_e\\n_r,1,3");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_FALSE(fs::exists(out / "lpo" / "grid.partial.csv"));
  EXPECT_TRUE(fs::exists(out / "datasets" / "A.manifest"));
  EXPECT_TRUE(fs::exists(out / "lpo" / "cells" / "ne2_nr3.jsonl"));

  const auto manifest = nlohmann::json::parse(read_file(out / "lpo" / "manifest.json"));
  const int n_r = manifest["best"]["n_r"].get<int>();
  ASSERT_EQ(cli::cmd_frv(opts, out / "lpo" / "manifest.json", so, se), cli::kOk) << se.str();
  const std::string rounds = read_file(out / "frv" / "rounds.jsonl");
  EXPECT_EQ(std::count(rounds.begin(), rounds.end(), '\n'), n_r);
  EXPECT_TRUE(fs::exists(out / "frv" / ("round_" + std::to_string(n_r) + ".ckpt")));
  const auto result = nlohmann::json::parse(read_file(out / "frv" / "result.json"));
  EXPECT_EQ(result["lpo_manifest_hash"], manifest["manifest_hash"]);
  EXPECT_EQ(result["applied"], manifest["best"]);
  EXPECT_NO_THROW(verify_seal(result));
  EXPECT_NE(so.str().find("final accuracy: "), std::string::npos);
}

TEST(Commands, RerunIsByteIdentical) {
  TempDir tmp;
  const fs::path a = tmp.path() / "a", b = tmp.path() / "b";
  const fs::path cfg = write_config(tmp.path(), tiny_config_json(a));
  std::ostringstream so, se;
  ASSERT_EQ(cli::cmd_lpo({cfg, {}, a}, false, so, se), cli::kOk);
  ASSERT_EQ(cli::cmd_lpo({cfg, {}, b}, false, so, se), cli::kOk);
  for (const char* rel : {"lpo/grid.csv", "lpo/manifest.json", "lpo/cells/ne1_nr3.jsonl",
                          "datasets/B.manifest"})
    EXPECT_EQ(read_file(a / rel), read_file(b / rel)) << rel;
  ASSERT_EQ(cli::cmd_lpo({cfg, 99, b}, false, so, se), cli::kOk);
  EXPECT_NE(read_file(a / "datasets/A.manifest"), read_file(b / "datasets/A.manifest"));
}

TEST(Commands, FrvRefusesBadProvenance) {
  TempDir tmp;
  const fs::path out = tmp.path() / "run";
  const fs::path cfg = write_config(tmp.path(), tiny_config_json(out));
  std::ostringstream so, se;
  ASSERT_EQ(cli::cmd_lpo({cfg, {}, {}}, false, so, se), cli::kOk);
  const fs::path manifest = out / "lpo" / "manifest.json";

  EXPECT_EQ(cli::cmd_frv({cfg, {}, {}}, tmp.path() / "missing.json", so, se), cli::kInvalidConfig);
  EXPECT_EQ(cli::cmd_frv({cfg, 17, {}}, manifest, so, se), cli::kProvenance);

  auto j = nlohmann::json::parse(read_file(manifest));
  j["manifest_hash"] = "0000000000000000";
  write_file_atomic(tmp.path() / "tampered.json", j.dump());
  se.str("");
  EXPECT_EQ(cli::cmd_frv({cfg, {}, {}}, tmp.path() / "tampered.json", so, se), cli::kProvenance);
  EXPECT_NE(se.str().find("provenance"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "frv" / "result.json"));
}

TEST(Commands, InvalidConfigNamesField) {
  TempDir tmp;
  auto j = tiny_config_json(tmp.path() / "out");
  j["grid"]["n_e"] = {0, 1};
  std::ostringstream so, se;
  EXPECT_EQ(cli::cmd_lpo({write_config(tmp.path(), j), {}, {}}, false, so, se), cli::kInvalidConfig);
  EXPECT_NE(se.str().find("grid.n_e"), std::string::npos);
  EXPECT_FALSE(fs::exists(tmp.path() / "out"));
}

TEST(Commands, TrainModesAgreeForOneClient) {
  TempDir tmp;
  auto j = tiny_config_json(tmp.path() / "fed");
  j["federation"]["clients"] = {"B"};
  j["federation"]["n_rounds"] = 3;
  const fs::path fed_cfg = write_config(tmp.path(), j, "fed.json");
  j["federation"]["mode"] = "centralized";
  j["output_dir"] = (tmp.path() / "central").string();
  const fs::path central_cfg = write_config(tmp.path(), j, "central.json");
  std::ostringstream so, se;
  ASSERT_EQ(cli::cmd_train({fed_cfg, {}, {}}, so, se), cli::kOk) << se.str();
  ASSERT_EQ(cli::cmd_train({central_cfg, {}, {}}, so, se), cli::kOk) << se.str();
  EXPECT_EQ(read_file(tmp.path() / "fed" / "train" / "final.ckpt"),
            read_file(tmp.path() / "central" / "train" / "final.ckpt"));

  std::ostringstream eval_out;
  ASSERT_EQ(cli::cmd_eval({fed_cfg, {}, {}}, tmp.path() / "fed" / "train" / "final.ckpt", eval_out, se),
            cli::kOk);
  const auto ev = nlohmann::json::parse(eval_out.str());
  EXPECT_GE(ev["accuracy"].get<double>(), 0.0);
  EXPECT_EQ(ev["per_class_count"].size(), 6u);
}

TEST(Commands, CorruptWritesManifestSheetAndTables) {
  TempDir tmp;
  const ImageGeometry geom{8, 8, 3};
  const auto part = partition_dataset(generate_dataset(Source::kA, 4, 1, geom), 1, 0.0, 1);
  const fs::path in = tmp.path() / "A.manifest";
  write_file_atomic(in, format_manifest(manifest_for(part, 1, geom)));

  cli::CorruptOptions o{in, 7, tmp.path() / "c1", 3, true, false};
  std::ostringstream so, se;
  ASSERT_EQ(cli::cmd_corrupt(o, so, se), cli::kOk) << se.str();
  o.out = tmp.path() / "c2";
  ASSERT_EQ(cli::cmd_corrupt(o, so, se), cli::kOk);
  const std::string m1 = read_file(tmp.path() / "c1" / "corrupted.manifest");
  EXPECT_EQ(m1, read_file(tmp.path() / "c2" / "corrupted.manifest"));
  const auto parsed = parse_manifest(m1);
  for (const auto& r : parsed.records) EXPECT_EQ(r.corruption->severity, 3);
  const std::string sheet = read_file(tmp.path() / "c1" / "contact_sheet_s3.ppm");
  EXPECT_EQ(sheet.rfind("P6\n37 19\n255\n", 0), 0u);

  std::ostringstream tables;
  ASSERT_EQ(cli::cmd_corrupt({{}, 0, {}, {}, false, true}, tables, se), cli::kOk);
  EXPECT_EQ(tables.str(), format_tables(release_tables()));
  EXPECT_NE(tables.str().find("gaussian_noise,sigma,0.04,0.06,0.08,0.1,0.14"), std::string::npos);
  EXPECT_NE(tables.str().find("darkness,delta,-0.1,-0.15,-0.2,-0.25,-0.3"), std::string::npos);

  write_file_atomic(tmp.path() / "bad.manifest", "not a manifest\n");
  EXPECT_NE(cli::cmd_corrupt({tmp.path() / "bad.manifest", 1, tmp.path(), {}, false, false}, so, se),
            cli::kOk);
}

TEST(Io, AtomicWriteLeavesNoTemporaries) {
  TempDir tmp;
  const fs::path target = tmp.path() / "out.bin";
  write_file_atomic(target, "first");
  write_file_atomic(target, "second");
  EXPECT_EQ(read_file(target), "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

int run(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  TempDir tmp;
  const std::string bin = FEDSTONE_CLI_PATH;
  const fs::path cfg = write_config(tmp.path(), tiny_config_json(tmp.path() / "out"));
  EXPECT_EQ(run(bin + " corrupt --print-tables"), 0);
  EXPECT_EQ(run(bin + " train --config " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "train" / "final.ckpt"));
  EXPECT_EQ(run(bin + " train --config " + (tmp.path() / "nope.json").string()), 2);
  EXPECT_EQ(run(bin + " frv --config " + cfg.string() + " --lpo-manifest " + cfg.string()), 3);
  EXPECT_NE(run(bin + " bogus"), 0);
}

}  // namespace
}  // namespace fedstone
