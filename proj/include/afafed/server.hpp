#pragma once

#include "afafed/coworker.hpp"
#include "afafed/model_core.hpp"
#include "afafed/types.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace afafed {

enum class StalenessKind { kPower, kExponential, kHinge };

std::string to_string(StalenessKind kind);
StalenessKind parse_staleness_kind(const std::string& name);

/// Mixing-parameter rule: clips, decay exponent and staleness weighting Phi.
struct MixingConfig {
  double beta_min = 0.01;
  double beta_max = 0.9;
  double decay_exponent = 0.0;   // de
  StalenessKind phi = StalenessKind::kPower;
  double alpha = 0.5;
  double hinge = 0.0;            // b, flat region of the hinge form

  void validate() const;
};

struct ServerConfig {
  MixingConfig mixing;
  double safety_margin = 4.0;    // multiplier of sigma in TH_U / TH_L
};

struct ServerState {
  ModelVector w_global;
  std::int64_t t = 0;
  FairnessWeights lambdas;
  double mu_tilde_sum = 0.0;
  std::int64_t count = 0;
  double mu_tilde = 0.0;
  double sigma_tilde_sum = 0.0;
  double sigma_tilde = 0.0;
  double th_upper = 0.0;
  double th_lower = 0.0;
  ServerConfig cfg;

  static ServerState initial(const ModelVector& w0, Eigen::Index k, const ServerConfig& cfg);
};

struct ScalingFactors {
  double psi;   // scale-up factor, >= 1
  double v;     // scale-down factor, in (0, 1]
};

enum class FairnessAction { kUnchanged, kScaledUp, kScaledDown };

/// Folds a received mu_bar into the running ensemble mean and the mean
/// absolute deviation (each term uses the mean as it stood at that step).
std::pair<double, double> update_fairness_stats(ServerState& state, double mu_bar_received);

/// TH_U = |mu~ + m sigma|, TH_L = |mu~ - m sigma| from the current statistics.
std::pair<double, double> update_thresholds(ServerState& state);

ScalingFactors scaling_functions(double mu_bar, double mu_tilde);

/// Scales lambda_k up (mu_bar > TH_U) or down (mu_bar < TH_L) and
/// renormalizes; the dead band leaves every coefficient untouched.
FairnessAction apply_fairness_update(ServerState& state, Eigen::Index k, double mu_bar);

/// age = (t + 1) - timestamp - 1 for a payload accepted at global time t + 1.
std::int64_t compute_age(const ServerState& state, std::int64_t payload_timestamp);

double phi(const MixingConfig& cfg, std::int64_t age);

double compute_beta(const ServerState& state, Eigen::Index k, std::int64_t age);

/// w̄ <- (1 - beta) w̄ + beta w_k; t <- t + 1.
const ModelVector& aggregate(ServerState& state, const ModelVector& w_k, double beta);

struct AggregationOutcome {
  std::int64_t t_before = 0;
  std::int64_t stamp = 0;        // new global time, stamped on the downlink
  std::int64_t age = 0;
  double beta = 0.0;
  FairnessAction fairness = FairnessAction::kUnchanged;
  double th_upper = 0.0;
  double th_lower = 0.0;
  ModelVector g_hat;             // w̄(t) - w_k(t+1)
};

/// The full server handler for one accepted uplink, in protocol order:
/// thresholds, lambda scaling, statistics, age, beta, aggregation.
AggregationOutcome accept_uplink(ServerState& state, const UplinkPayload& payload);

}  // namespace afafed
