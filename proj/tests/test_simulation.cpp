#include "afafed/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace afafed;

namespace {

Dataset<double> shard(Rng& rng, int n, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const ModelVector w_true = ModelVector::LinSpaced(dim, -1.0, 1.0);
  Dataset<double> out;
  for (int i = 0; i < n; ++i) {
    TrainingExample e;
    e.x = ModelVector::NullaryExpr(dim, [&] { return normal(rng); });
    e.y = ModelVector::Constant(1, w_true.dot(e.x) + 0.1 * normal(rng));
    out.push_back(e);
  }
  return out;
}

struct Fixture {
  SimulationConfig cfg;
  std::vector<CoworkerSetup> setups;
};

Fixture small(int k_total, double p_loss = 0.0, std::int64_t T = 50) {
  Fixture f;
  f.cfg.model = LossModel{LossKind::kQuadratic, 3};
  f.cfg.adaptive.iter_max = 4;
  f.cfg.buffer_capacity = 8;
  f.cfg.minibatch_size = 4;
  f.cfg.T = T;
  f.cfg.seed = 5;
  f.cfg.horizon = 1e6;
  Rng data(99);
  for (int k = 0; k < k_total; ++k) {
    CoworkerSetup s;
    s.shard = shard(data, 40, 3);
    s.compute = ComputeModel{1.0 + k, 0.1};
    s.link.p_loss = p_loss;
    s.link.rate.nominal = 1000.0;
    s.link.payload_bits = 320;
    s.arrivals = ArrivalSpec{ArrivalKind::kPoisson, 20.0, 1.0, {}};
    f.setups.push_back(s);
  }
  return f;
}

SimulationResult run(Fixture f) {
  Simulation sim(std::move(f.cfg), std::move(f.setups));
  return sim.run();
}

}  // namespace

TEST(Simulation, StopsAfterTAggregations) {
  auto r = run(small(3, 0.0, 1));
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.aggregations, 1);
  EXPECT_EQ(r.stop, StopReason::kAggregations);

  r = run(small(3, 0.0, 40));
  ASSERT_EQ(r.records.size(), 40u);
  for (std::size_t i = 0; i < r.records.size(); ++i) EXPECT_EQ(r.records[i].t, std::int64_t(i + 1));
}

TEST(Simulation, EmptyQueueTerminatesCleanly) {
  auto f = small(2);
  for (auto& s : f.setups) s.arrivals = ArrivalSpec{ArrivalKind::kTrace, 1.0, 1.0, {}};
  const auto r = run(f);
  EXPECT_EQ(r.stop, StopReason::kQueueEmpty);
  EXPECT_EQ(r.events, 0u);
  EXPECT_TRUE(r.records.empty());
}

TEST(Simulation, HorizonAndBudget) {
  auto f = small(2, 0.0, 1000000);
  f.cfg.horizon = 3.0;
  auto r = run(f);
  EXPECT_EQ(r.stop, StopReason::kHorizon);
  EXPECT_DOUBLE_EQ(r.end_time, 3.0);
  for (const auto& rec : r.records) EXPECT_LE(rec.virtual_time, 3.0);

  f = small(2, 0.0, 1000000);
  f.cfg.event_budget = 500;
  r = run(f);
  EXPECT_EQ(r.stop, StopReason::kEventBudget);
  EXPECT_EQ(r.events, 500u);
}

TEST(Simulation, DeterministicForSeed) {
  const auto a = run(small(4, 0.25, 80));
  const auto b = run(small(4, 0.25, 80));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].virtual_time, b.records[i].virtual_time);
    EXPECT_EQ(a.records[i].sender, b.records[i].sender);
    EXPECT_EQ(a.records[i].beta, b.records[i].beta);
    EXPECT_EQ(a.records[i].global_risk, b.records[i].global_risk);
  }
  EXPECT_EQ(a.w_final, b.w_final);

  auto f = small(4, 0.25, 80);
  f.cfg.seed = 6;
  const auto c = run(f);
  EXPECT_NE(a.w_final, c.w_final);
}

TEST(Simulation, ProfilingIsObservationOnly) {
  const auto plain = run(small(3, 0.1, 60));
  auto f = small(3, 0.1, 60);
  f.cfg.profiling = true;
  const auto prof = run(f);
  ASSERT_EQ(plain.records.size(), prof.records.size());
  for (std::size_t i = 0; i < plain.records.size(); ++i) {
    EXPECT_EQ(plain.records[i].virtual_time, prof.records[i].virtual_time);
    EXPECT_EQ(plain.records[i].lambda_checksum, prof.records[i].lambda_checksum);
    EXPECT_EQ(plain.records[i].grad_sqnorm, prof.records[i].grad_sqnorm);
  }
  ASSERT_TRUE(prof.profile);
  EXPECT_EQ(prof.profile->samples(), 60);
  EXPECT_EQ(prof.profile->profiles().size(), 3u);
  EXPECT_FALSE(plain.profile);
}

TEST(Simulation, InvariantsOverARun) {
  const auto r = run(small(5, 0.2, 300));
  std::uint64_t accepted = 0;
  for (const auto& c : r.coworkers) {
    accepted += c.accepted;
    EXPECT_EQ(c.stalls_post_warmup, 0u);
    EXPECT_LE(c.accepted + c.drops, c.attempts);
  }
  EXPECT_EQ(accepted, 300u);
  double prev_time = 0.0;
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.fairness_index, 1.0 / 5 - 1e-12);
    EXPECT_LE(rec.fairness_index, 1.0 + 1e-12);
    EXPECT_GE(rec.virtual_time, prev_time);
    EXPECT_GE(rec.age, 0);
    prev_time = rec.virtual_time;
  }
  EXPECT_NEAR(r.lambdas_final.values().sum(), 1.0, 1e-12);
}

TEST(Simulation, RiskColumnMatchesOfflineRecomputation) {
  auto f = small(3, 0.0, 40);
  Simulation sim(f.cfg, f.setups);
  std::vector<ModelVector> models;
  std::vector<FairnessWeights> lambdas;
  sim.on_aggregation = [&](const ServerState& s, const AggregationOutcome&, const UplinkPayload&) {
    models.push_back(s.w_global);
    lambdas.push_back(s.lambdas);
  };
  const auto r = sim.run();
  ASSERT_EQ(models.size(), r.records.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double risk = global_risk(f.cfg.model, models[i],
                                    std::span<const Dataset<double>>(sim.shards()), lambdas[i]);
    EXPECT_NEAR(*r.records[i].global_risk, risk, 1e-12);
  }
}

TEST(Simulation, RiskEvaluationCadence) {
  auto f = small(2, 0.0, 30);
  f.cfg.risk_eval_every = 10;
  const auto r = run(f);
  int with_risk = 0;
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.global_risk.has_value(), rec.t % 10 == 0);
    with_risk += rec.global_risk.has_value();
  }
  EXPECT_EQ(with_risk, 3);
}

TEST(Simulation, TotalLossOnlyFiresTimers) {
  auto f = small(2, 1.0, 10);
  f.cfg.horizon = 20.0;
  const auto r = run(f);
  EXPECT_TRUE(r.records.empty());
  for (const auto& c : r.coworkers) {
    EXPECT_GT(c.attempts, 0u);
    EXPECT_EQ(c.drops, c.attempts);
    EXPECT_GE(c.timer_expiries + 1, c.attempts);
  }
}

TEST(Simulation, RandomRatesProduceLateDownlinksWithoutBreaking) {
  auto f = small(3, 0.0, 400);
  f.cfg.timer_factor = 0.5;
  for (auto& s : f.setups) s.link.rate = RateDistribution{RateKind::kExponential, 1000.0, 0.0};
  const auto r = run(f);
  EXPECT_EQ(r.aggregations, 400);
  std::uint64_t expiries = 0;
  for (const auto& c : r.coworkers) expiries += c.timer_expiries;
  EXPECT_GT(expiries, 0u);
}

TEST(Simulation, UplinkHookCanRigTheMultiplierAverage) {
  auto f = small(4, 0.0, 200);
  Simulation sim(f.cfg, f.setups);
  sim.on_uplink = [](UplinkPayload& p) {
    p.mu_bar = p.sender == 0 ? 1000.0 + p.local_clock : 0.0;
  };
  const auto r = sim.run();
  EXPECT_GT(r.lambdas_final[0], 0.25);
}

TEST(Simulation, DivergenceCarriesCoworkerAndTime) {
  auto f = small(1, 0.0, 100);
  f.cfg.adaptive.eta_min = f.cfg.adaptive.eta_max = 1e150;
  Simulation sim(f.cfg, f.setups);
  try {
    sim.run();
    FAIL() << "expected divergence";
  } catch (const NumericDivergence& e) {
    EXPECT_EQ(e.coworker(), 0);
    EXPECT_GT(e.virtual_time(), 0.0);
  }
}

TEST(Simulation, RejectsBadConfig) {
  auto f = small(1);
  f.cfg.minibatch_size = 100;
  EXPECT_THROW(Simulation(f.cfg, f.setups), ConfigError);
  f = small(1);
  f.setups[0].shard.clear();
  EXPECT_THROW(Simulation(f.cfg, f.setups), ConfigError);
  f = small(1);
  EXPECT_THROW(Simulation(f.cfg, {}), ConfigError);
}

TEST(LambdaChecksum, SensitiveToBits) {
  auto a = FairnessWeights::uniform(3);
  auto b = a;
  b.scale_and_normalize(1, 1.0 + 1e-15);
  EXPECT_EQ(lambda_checksum(a), lambda_checksum(FairnessWeights::uniform(3)));
  EXPECT_NE(lambda_checksum(a), lambda_checksum(b));
}
