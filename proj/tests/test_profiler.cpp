#include "afafed/profiler.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace afafed;

namespace {

ModelVector vec(std::initializer_list<double> v) {
  ModelVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(ProfilingLog, SingleRecordAverages) {
  ProfilingLog log(2);
  log.record_aggregation(vec({3.0, 4.0}), vec({1.0, 0.0}));
  const auto e = finalize(log, FairnessWeights::uniform(1));
  EXPECT_EQ(e.g_bar, vec({3.0, 4.0}));
  EXPECT_DOUBLE_EQ(e.g_norm_mean, 5.0);
  EXPECT_DOUBLE_EQ(e.g_sqnorm_mean, 25.0);
}

TEST(ProfilingLog, OppositeRecordsCancelInTheMean) {
  ProfilingLog log(2);
  log.record_aggregation(vec({1.0, 2.0}), vec({0.0, 0.0}));
  log.record_aggregation(vec({-1.0, -2.0}), vec({0.0, 0.0}));
  const auto e = finalize(log, FairnessWeights::uniform(1));
  EXPECT_EQ(e.g_bar, vec({0.0, 0.0}));
  EXPECT_DOUBLE_EQ(e.g_norm_mean, std::sqrt(5.0));
}

TEST(ProfilingLog, SumsMatchTraceReplay) {
  Rng rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProfilingLog log(3);
  std::vector<ModelVector> gs, ls;
  for (int i = 0; i < 500; ++i) {
    gs.push_back(ModelVector::NullaryExpr(3, [&] { return normal(rng); }));
    ls.push_back(ModelVector::NullaryExpr(3, [&] { return normal(rng); }));
    log.record_aggregation(gs.back(), ls.back());
  }
  ModelVector gsum = ModelVector::Zero(3), lsum = ModelVector::Zero(3);
  double nsum = 0.0, sqsum = 0.0;
  for (int i = 0; i < 500; ++i) {
    gsum += gs[i];
    lsum += ls[i];
    nsum += gs[i].norm();
    sqsum += gs[i].squaredNorm();
  }
  EXPECT_LE((log.g_hat_sum() - gsum).norm(), 1e-12);
  EXPECT_LE((log.local_grad_sum() - lsum).norm(), 1e-12);
  EXPECT_NEAR(log.g_hat_norm_sum(), nsum, 1e-10);
  EXPECT_NEAR(log.g_hat_sqnorm_sum(), sqsum, 1e-10);
  EXPECT_EQ(log.samples(), 500);
}

TEST(ProfilingLog, DimensionMismatchThrows) {
  ProfilingLog log(2);
  EXPECT_THROW(log.record_aggregation(vec({1.0}), vec({1.0, 1.0})), DomainError);
}

TEST(ProfilingLog, MergeEqualsPooledRecording) {
  ProfilingLog a(1), b(1), all(1);
  for (double x : {1.0, -2.0, 5.0}) {
    a.record_aggregation(vec({x}), vec({x / 2}));
    all.record_aggregation(vec({x}), vec({x / 2}));
  }
  for (double x : {0.5, 3.0}) {
    b.record_aggregation(vec({x}), vec({x / 2}));
    all.record_aggregation(vec({x}), vec({x / 2}));
  }
  a.merge(b);
  EXPECT_EQ(a.samples(), all.samples());
  EXPECT_EQ(a.g_hat_sum(), all.g_hat_sum());
  EXPECT_DOUBLE_EQ(a.g_hat_sqnorm_sum(), all.g_hat_sqnorm_sum());
}

TEST(Finalize, IdentityTraceGivesUnitConstants) {
  // Ĝ(t) takes the values 5u, u, -3u; the recorded gradients average to u.
  const ModelVector u = vec({0.6, 0.8});
  ProfilingLog log(2);
  for (double s : {5.0, 1.0, -3.0}) log.record_aggregation(s * u, u);
  const auto e = finalize(log, FairnessWeights::uniform(1));
  ASSERT_TRUE(e.feasible());
  EXPECT_NEAR(*e.C_hat, 1.0, 1e-15);
  EXPECT_NEAR(e.k0, 0.0, 1e-15);
  EXPECT_NEAR(*e.Gamma_hat, 1.0, 1e-15);
  // (25 + 1 + 9)/3 - 3^2 - 1
  EXPECT_NEAR(*e.A_hat, 35.0 / 3.0 - 10.0, 1e-12);
}

TEST(Finalize, AntiAlignedTraceIsGated) {
  ProfilingLog log(2);
  log.record_aggregation(vec({-1.0, 0.0}), vec({1.0, 0.0}));
  log.record_aggregation(vec({-3.0, 0.0}), vec({1.0, 0.0}));
  const auto e = finalize(log, FairnessWeights::uniform(1));
  EXPECT_FALSE(e.inner_positive);
  EXPECT_FALSE(e.feasible());
  EXPECT_FALSE(e.C_hat);
  EXPECT_FALSE(e.Gamma_hat);
  EXPECT_FALSE(e.A_hat);
}

TEST(Finalize, NegativeVarianceSurplusIsGated) {
  ProfilingLog log(1);
  for (int i = 0; i < 10; ++i) log.record_aggregation(vec({2.0}), vec({2.0}));
  const auto e = finalize(log, FairnessWeights::uniform(1));
  EXPECT_TRUE(e.inner_positive);
  EXPECT_FALSE(e.variance_surplus);
  EXPECT_FALSE(e.A_hat);
}

TEST(Finalize, ZeroGradientLeavesCUndefined) {
  ProfilingLog log(1);
  log.record_aggregation(vec({1.0}), vec({0.0}));
  const auto e = finalize(log, FairnessWeights::uniform(1));
  EXPECT_FALSE(e.c_defined);
  EXPECT_FALSE(e.C_hat);
}

TEST(Finalize, EmittedEstimatesSatisfyTheirInequalitiesOnTheTrace) {
  Rng rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  int emitted = 0;
  for (int trial = 0; trial < 200; ++trial) {
    ProfilingLog log(3);
    const ModelVector dir = ModelVector::NullaryExpr(3, [&] { return normal(rng); });
    for (int i = 0; i < 30; ++i) {
      const double s = 2.0 * normal(rng);
      log.record_aggregation(s * dir + ModelVector::NullaryExpr(3, [&] { return normal(rng); }),
                             dir + 0.3 * ModelVector::NullaryExpr(3, [&] { return normal(rng); }));
    }
    const auto e = finalize(log, FairnessWeights::uniform(1));
    if (!e.feasible()) continue;
    ++emitted;
    const double g2 = e.grad_hat.squaredNorm();
    EXPECT_LE(*e.C_hat * g2, e.inner * (1 + 1e-12));
    EXPECT_LE(e.g_bar.norm(), *e.Gamma_hat * std::sqrt(g2) * (1 + 1e-12));
    EXPECT_LE(e.g_sqnorm_mean - e.g_norm_mean * e.g_norm_mean, (*e.A_hat + g2) * (1 + 1e-12));
    EXPECT_GE(*e.Gamma_hat, *e.C_hat);
  }
  EXPECT_GT(emitted, 0);
}

TEST(Finalize, ProfilingPhaseEstimates) {
  ProfilingLog log(1);
  log.record_aggregation(vec({1.0}), vec({1.0}));
  log.add_coworker_profile({0, 4.0, 1.0, 2.0});
  log.add_coworker_profile({1, 8.0, 3.0, 5.0});
  log.add_coworker_profile({1, 6.0, 1.0, std::nullopt});
  const auto lam = FairnessWeights(vec({0.25, 0.75}));
  const auto e = finalize(log, lam);
  EXPECT_DOUBLE_EQ(*e.F0_hat, 0.25 * 4.0 + 0.75 * 7.0);
  EXPECT_DOUBLE_EQ(*e.F_star_hat, 0.25 * 1.0 + 0.75 * 2.0);
  EXPECT_DOUBLE_EQ(*e.zeta_hat, 5.0);
}

TEST(Finalize, ZetaUndefinedWithoutDisplacement) {
  ProfilingLog log(1);
  log.record_aggregation(vec({1.0}), vec({1.0}));
  log.add_coworker_profile({0, 1.0, 1.0, std::nullopt});
  const auto e = finalize(log, FairnessWeights::uniform(1));
  EXPECT_FALSE(e.zeta_defined);
  EXPECT_FALSE(e.zeta_hat);
}

TEST(SecantRatio, QuadraticEqualsCurvatureAlongDirection) {
  LossModel m{LossKind::kQuadratic, 1};
  Dataset<double> data{{vec({2.0}), vec({0.0}), 0}};
  // gradient 4 w: secant ratio over the same displacement is 4
  auto r = secant_ratio(m, data, vec({0.0}), vec({1.0}), vec({0.0}), vec({1.0}));
  EXPECT_DOUBLE_EQ(*r, 4.0);
  EXPECT_FALSE(secant_ratio(m, data, vec({0.0}), vec({1.0}), vec({1.0}), vec({1.0})));
}
