#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fedstone/data/partition.hpp"
#include "fedstone/federation/aggregation.hpp"
#include "fedstone/federation/server.hpp"
#include "support/oracles.hpp"

namespace fedstone {
namespace {

const ImageGeometry kTiny{8, 8, 3};

TrainOptions tiny_options() {
  TrainOptions opts;
  opts.model = ModelSpec{kTiny.numel(), {16}, kNumClasses};
  opts.optimizer.learning_rate = 1e-3;
  return opts;
}

ClientData client_from(const DatasetPartition& p, std::string id) {
  return {std::move(id), p.train, p.validation, p.test};
}

std::vector<ClientData> two_clients(const ImageGeometry& geom, int per_class, std::uint64_t seed) {
  const int test = per_class / 5;
  auto a = partition_dataset(generate_dataset(Source::kA, per_class, seed, geom), test, 0.1, seed);
  auto b = partition_dataset(generate_dataset(Source::kB, per_class, seed, geom), test, 0.1, seed);
  return {client_from(a, "A"), client_from(b, "B")};
}

ClientUpdate constant_update(std::string id, const Layout& layout, double value, std::uint64_t n) {
  ClientUpdate u;
  u.client_id = std::move(id);
  u.params = ParameterVector(layout);
  std::fill(u.params.values.begin(), u.params.values.end(), value);
  u.num_examples = n;
  return u;
}

TEST(InitGlobal, WarmStartIsReturnedVerbatim) {
  const ModelSpec spec{10, {4}, 3};
  ParameterVector warm(layout_for(spec));
  for (std::size_t i = 0; i < warm.size(); ++i) warm.values[i] = 0.001 * static_cast<double>(i);
  EXPECT_EQ(init_global(spec, 1, warm), warm);
  EXPECT_THROW(init_global(ModelSpec{10, {5}, 3}, 1, warm), ConfigError);
}

TEST(InitGlobal, SeededAndReproducible) {
  const ModelSpec spec{10, {4}, 3};
  EXPECT_EQ(init_global(spec, 5), init_global(spec, 5));
  EXPECT_NE(init_global(spec, 5), init_global(spec, 6));
}

// U(-b, b) with b = 1/sqrt(fan_in) has standard deviation b/sqrt(3).
TEST(InitGlobal, PerLayerStdMatchesFanInRule) {
  const ModelSpec spec{192, {64}, 6};
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::string name = "fc" + std::to_string(l) + ".weight";
    ASSERT_EQ(layout_for(spec)[2 * l].name, name);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const ParameterVector p = init_global(spec, seed);
      for (double v : p.tensor(2 * l)) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    const double target = 1.0 / std::sqrt(static_cast<double>(spec.width(l))) / std::sqrt(3.0);
    EXPECT_NEAR(sd, target, 0.1 * target) << name;
  }
}

TEST(LocalTrain, EmptyDatasetIsAnError) {
  const auto opts = tiny_options();
  ClientData empty{"X", {}, {}, {}};
  EXPECT_THROW(local_train(empty, init_global(opts.model, 1), 3, 1, opts, 1), ConfigError);
}

TEST(LocalTrain, ReportsCountsAndIsDeterministic) {
  const auto opts = tiny_options();
  const auto clients = two_clients(kTiny, 20, 3);
  const auto init = init_global(opts.model, 1);
  const auto u1 = local_train(clients[0], init, 2, 1, opts, 7);
  const auto u2 = local_train(clients[0], init, 2, 1, opts, 7);
  EXPECT_EQ(u1.num_examples, clients[0].train.size());
  EXPECT_EQ(u1.params, u2.params);
  EXPECT_EQ(u1.train_loss, u2.train_loss);
  EXPECT_NE(u1.params, init);
}

TEST(LocalTrain, IdenticalClientsGiveIdenticalUpdates) {
  const auto opts = tiny_options();
  const auto clients = two_clients(kTiny, 20, 3);
  ClientData twin = clients[0];
  const auto init = init_global(opts.model, 1);
  EXPECT_EQ(local_train(clients[0], init, 1, 2, opts, 4).params,
            local_train(twin, init, 1, 2, opts, 4).params);
}

TEST(LocalTrain, OneClientEqualsCentralizedTraining) {
  const auto opts = tiny_options();
  const auto clients = two_clients(kTiny, 20, 3);
  const auto init = init_global(opts.model, 1);
  const auto update = local_train(clients[0], init, 3, 1, opts, 9);
  const auto central = train_centralized(opts, init, clients[0].train, clients[0].id, 1, 3, 9);
  EXPECT_EQ(update.params, central);
}

TEST(FedAvg, SingleUpdateIsIdentity) {
  const Layout layout = layout_for(ModelSpec{3, {2}, 2});
  auto u = constant_update("a", layout, 0.25, 10);
  u.params.values[3] = -7.5;
  EXPECT_EQ(fedavg({u}), u.params);
}

TEST(FedAvg, OppositeParametersCancel) {
  const Layout layout = layout_for(ModelSpec{3, {2}, 2});
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  auto a = constant_update("a", layout, 0.0, 50);
  for (double& v : a.params.values) v = nd(gen);
  auto b = a;
  b.client_id = "b";
  for (double& v : b.params.values) v = -v;
  for (double v : fedavg({a, b}).values) EXPECT_EQ(v, 0.0);
}

TEST(FedAvg, ExampleCountWeighting) {
  const Layout layout = layout_for(ModelSpec{2, {}, 2});
  const auto out = fedavg({constant_update("x", layout, 1.0, 100), constant_update("y", layout, 2.0, 300),
                           constant_update("z", layout, 3.0, 600)});
  for (double v : out.values) EXPECT_NEAR(v, 2.5, 1e-15);
  const auto uniform = fedavg({constant_update("x", layout, 1.0, 100), constant_update("y", layout, 2.0, 300),
                               constant_update("z", layout, 3.0, 600)},
                              AggregationWeighting::kUniform);
  for (double v : uniform.values) EXPECT_NEAR(v, 2.0, 1e-15);
}

TEST(FedAvg, MatchesExtendedPrecisionAndIsOrderFree) {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> count(1, 5000);
  const Layout layout = layout_for(ModelSpec{7, {5}, 3});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ClientUpdate> updates;
    std::vector<std::vector<double>> thetas;
    std::vector<double> counts;
    for (int k = 0; k < 2 + trial % 6; ++k) {
      auto u = constant_update("c" + std::to_string(k), layout, 0.0, count(gen));
      for (double& v : u.params.values) v = nd(gen);
      thetas.push_back(u.params.values);
      counts.push_back(static_cast<double>(u.num_examples));
      updates.push_back(std::move(u));
    }
    const auto expected = testing::weighted_mean(thetas, counts);
    const auto got = fedavg(updates);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_LE(testing::relative_error(got.values[i], expected[i], 1e-300), 1e-12);
      double lo = thetas[0][i], hi = thetas[0][i];
      for (const auto& t : thetas) lo = std::min(lo, t[i]), hi = std::max(hi, t[i]);
      EXPECT_GE(got.values[i], lo);
      EXPECT_LE(got.values[i], hi);
    }
    std::shuffle(updates.begin(), updates.end(), gen);
    const auto permuted = fedavg(updates);
    for (std::size_t i = 0; i < got.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(permuted.values[i]), std::bit_cast<std::uint64_t>(got.values[i]));
  }
}

TEST(FedAvg, ErrorCases) {
  const Layout layout = layout_for(ModelSpec{2, {}, 2});
  EXPECT_THROW(fedavg({}), ProtocolError);
  const auto good = constant_update("ok", layout, 1.0, 3);
  EXPECT_THROW(fedavg({good, constant_update("odd", layout_for(ModelSpec{3, {}, 2}), 1.0, 3)}), ProtocolError);
  auto bad = constant_update("broken", layout, 1.0, 3);
  bad.params.values[1] = std::numeric_limits<double>::infinity();
  try {
    fedavg({good, bad});
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
  }
}

TEST(Evaluate, ConstantPredictorScoresOneSixth) {
  const auto part = partition_dataset(generate_dataset(Source::kA, 8, 1, kTiny), 4, 0.0, 1);
  const ModelSpec spec{kTiny.numel(), {}, kNumClasses};
  ParameterVector p(layout_for(spec));
  p.tensor(1)[0] = 5.0;
  const auto ev = evaluate_global(spec, p, part.test, default_stats(3));
  EXPECT_DOUBLE_EQ(ev.accuracy, 1.0 / 6.0);
  EXPECT_EQ(ev.per_class_accuracy[0], 1.0);
  EXPECT_EQ(ev.per_class_accuracy[3], 0.0);
}

TEST(Evaluate, DuplicationAndBalancedMean) {
  const auto opts = tiny_options();
  const auto part = partition_dataset(generate_dataset(Source::kB, 12, 2, kTiny), 6, 0.0, 1);
  const auto p = init_global(opts.model, 3);
  const auto ev = evaluate_global(opts.model, p, part.test, opts.stats);
  auto doubled = part.test;
  doubled.insert(doubled.end(), part.test.begin(), part.test.end());
  EXPECT_DOUBLE_EQ(evaluate_global(opts.model, p, doubled, opts.stats).accuracy, ev.accuracy);
  double mean = 0.0;
  for (double a : ev.per_class_accuracy) mean += a / 6.0;
  EXPECT_NEAR(ev.accuracy, mean, 1e-15);
  EXPECT_THROW(evaluate_global(opts.model, p, std::vector<LabeledSample>{}, opts.stats), ConfigError);
}

TEST(Rounds, OneClientRoundReturnsItsUpdate) {
  FederationConfig cfg;
  cfg.train = tiny_options();
  cfg.local_epochs = 2;
  cfg.seed = 5;
  const auto clients = two_clients(kTiny, 20, 3);
  const std::vector<ClientData> one{clients[0]};
  const auto init = init_global(cfg.train.model, 1);
  InProcessTransport transport;
  const auto eval = prepare_eval_set(clients[0].test, cfg.train.stats);
  const auto [params, record] = run_round(init, one, cfg, eval, 1, transport);
  EXPECT_EQ(params, local_train(clients[0], init, 2, 1, cfg.train, 5).params);
  ASSERT_EQ(record.per_client.size(), 1u);
  EXPECT_GT(transport.bytes_sent(), 0u);
}

TEST(Rounds, OneClientFederationEqualsCentralized) {
  FederationConfig cfg;
  cfg.train = tiny_options();
  cfg.seed = 5;
  const auto clients = two_clients(kTiny, 20, 3);
  const std::vector<ClientData> one{clients[1]};
  const auto init = init_global(cfg.train.model, 1);
  const auto eval = prepare_eval_set(clients[1].test, cfg.train.stats);
  for (auto [n_e, n_r] : {std::pair{1, 3}, {3, 1}, {2, 2}}) {
    cfg.local_epochs = n_e;
    cfg.n_rounds = n_r;
    const auto fed = run_federation(cfg, one, eval, init);
    EXPECT_EQ(fed.params, train_centralized(cfg.train, init, clients[1].train, "B", n_r, n_e, 5));
  }
}

TEST(Rounds, ValidationRejectsZeroRoundsAndBadClients) {
  FederationConfig cfg;
  cfg.train = tiny_options();
  cfg.n_rounds = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.n_rounds = 1;
  cfg.local_epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  const auto clients = two_clients(kTiny, 20, 3);
  EXPECT_THROW(check_clients({clients[0], clients[0]}), ConfigError);
  auto renamed = clients[0];
  renamed.id = "A2";
  EXPECT_THROW(check_clients({clients[0], renamed}), ConfigError);
}

// Two hospitals at full resolution, one small federation. Accuracy after the
// first round must clear chance by 10 points, and the last round may not be
// more than 5 points below the first.
TEST(Rounds, FederationLearnsAndIsDeterministic) {
  FederationConfig cfg;
  cfg.train.model = ModelSpec{ImageGeometry{}.numel(), {64}, kNumClasses};
  cfg.local_epochs = 1;
  cfg.n_rounds = 3;
  cfg.seed = 11;
  const auto clients = two_clients(ImageGeometry{}, 120, 11);
  const auto eval = prepare_eval_set(union_test_set(clients), cfg.train.stats);
  const auto init = init_global(cfg.train.model, 11);
  const auto a = run_federation(cfg, clients, eval, init);
  const auto b = run_federation(cfg, clients, eval, init);
  ASSERT_EQ(a.records.size(), 3u);
  EXPECT_GT(a.records.front().global_accuracy, 1.0 / 6.0 + 0.10);
  EXPECT_GE(a.records.back().global_accuracy, a.records.front().global_accuracy - 0.05);
  EXPECT_EQ(a.params, b.params);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(round_log_line(a.records[r]), round_log_line(b.records[r]));
    EXPECT_EQ(a.records[r].round_index, r + 1);
    ASSERT_EQ(a.records[r].per_client.size(), 2u);
    EXPECT_EQ(a.records[r].per_client[0].client_id, "A");
    EXPECT_EQ(a.records[r].per_client[0].num_examples, clients[0].train.size());
  }
}

// Every field that can cross the transport is a parameter vector, a count, a
// metric or routing metadata. The structured bindings pin the member count,
// so a new member fails to compile here until it is added to the schema.
TEST(Privacy, MessagesCarryNoData) {
  const std::set<FieldRole> allowed{FieldRole::kParameters, FieldRole::kCount, FieldRole::kMetric,
                                    FieldRole::kClientId, FieldRole::kRoundIndex};
  for (const auto& f : message_schema()) EXPECT_TRUE(allowed.contains(f.role)) << f.name;

  ClientUpdate u;
  auto& [c0, c1, c2, c3, c4, c5] = u;
  (void)c0, (void)c1, (void)c2, (void)c3, (void)c4, (void)c5;
  EXPECT_EQ(schema_of<ClientUpdate>().size(), 6u);
  GlobalModelMessage g;
  auto& [g0, g1] = g;
  (void)g0, (void)g1;
  EXPECT_EQ(schema_of<GlobalModelMessage>().size(), 2u);

  u.client_id = "A";
  u.params = ParameterVector(layout_for(ModelSpec{2, {}, 2}));
  u.num_examples = 4;
  const auto wire = nlohmann::json::parse(encode_message(u));
  std::set<std::string> keys;
  for (const auto& [k, v] : wire.items()) keys.insert(k);
  EXPECT_EQ(keys, (std::set<std::string>{"client_id", "round_index", "params", "num_examples",
                                         "train_loss", "validation_loss"}));
}

TEST(Transport, RoundTripAndOrdering) {
  InProcessTransport t;
  const Layout layout = layout_for(ModelSpec{2, {}, 2});
  t.send_update(constant_update("b", layout, 2.0, 1));
  t.send_update(constant_update("a", layout, 1.0, 1));
  const auto got = t.recv_updates();
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].client_id, "a");
  EXPECT_EQ(got[1].params.values[0], 2.0);
  EXPECT_TRUE(t.recv_updates().empty());

  auto msg = nlohmann::json::parse(encode_message(constant_update("a", layout, 1.0, 1)));
  msg["pixels"] = std::vector<double>{0.1, 0.2};
  EXPECT_THROW(decode_message<ClientUpdate>(msg.dump()), ProtocolError);
}

}  // namespace
}  // namespace fedstone
