#include "afafed/server.hpp"

#include <algorithm>
#include <cmath>

namespace afafed {

std::string to_string(StalenessKind kind) {
  switch (kind) {
    case StalenessKind::kPower: return "power";
    case StalenessKind::kExponential: return "exponential";
    case StalenessKind::kHinge: return "hinge";
  }
  return "unknown";
}

StalenessKind parse_staleness_kind(const std::string& name) {
  if (name == "power") return StalenessKind::kPower;
  if (name == "exponential") return StalenessKind::kExponential;
  if (name == "hinge") return StalenessKind::kHinge;
  throw ConfigError("unknown staleness function '" + name + "'");
}

void MixingConfig::validate() const {
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max <= 1.0))
    throw ConfigError("mixing clips need 0 < beta_min <= beta_max <= 1");
  if (!(decay_exponent >= 0.0)) throw ConfigError("mixing.decay_exponent must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("mixing.alpha must be > 0");
  if (!(hinge >= 0.0)) throw ConfigError("mixing.hinge must be >= 0");
}

ServerState ServerState::initial(const ModelVector& w0, Eigen::Index k, const ServerConfig& cfg) {
  ServerState s;
  s.w_global = w0;
  s.lambdas = FairnessWeights::uniform(k);
  s.cfg = cfg;
  return s;
}

std::pair<double, double> update_fairness_stats(ServerState& state, double mu_bar_received) {
  state.count += 1;
  state.mu_tilde_sum += mu_bar_received;
  const auto n = static_cast<double>(state.count);
  state.mu_tilde = state.mu_tilde_sum / n;
  state.sigma_tilde_sum += std::abs(state.mu_tilde - mu_bar_received);
  state.sigma_tilde = state.sigma_tilde_sum / n;
  return {state.mu_tilde, state.sigma_tilde};
}

std::pair<double, double> update_thresholds(ServerState& state) {
  const double margin = state.cfg.safety_margin * state.sigma_tilde;
  state.th_upper = std::abs(state.mu_tilde + margin);
  state.th_lower = std::abs(state.mu_tilde - margin);
  return {state.th_upper, state.th_lower};
}

ScalingFactors scaling_functions(double mu_bar, double mu_tilde) {
  if (mu_bar < 0.0 || mu_tilde < 0.0) throw DomainError("scaling_functions: negative argument");
  const double psi = 1.0 + std::log(1.0 + std::abs(mu_bar - mu_tilde) / (1.0 + mu_tilde));
  return {psi, 1.0 / psi};
}

FairnessAction apply_fairness_update(ServerState& state, Eigen::Index k, double mu_bar) {
  const ScalingFactors f = scaling_functions(mu_bar, state.mu_tilde);
  if (mu_bar > state.th_upper) {
    state.lambdas.scale_and_normalize(k, f.psi);
    return FairnessAction::kScaledUp;
  }
  if (mu_bar < state.th_lower) {
    state.lambdas.scale_and_normalize(k, f.v);
    return FairnessAction::kScaledDown;
  }
  return FairnessAction::kUnchanged;
}

std::int64_t compute_age(const ServerState& state, std::int64_t payload_timestamp) {
  const std::int64_t age = (state.t + 1) - payload_timestamp - 1;
  if (age < 0) throw ProtocolError("payload timestamp lies in the future");
  return age;
}

double phi(const MixingConfig& cfg, std::int64_t age) {
  if (age < 0) throw DomainError("phi: negative age");
  const auto a = static_cast<double>(age);
  switch (cfg.phi) {
    case StalenessKind::kPower: return std::pow(1.0 + a, -cfg.alpha);
    case StalenessKind::kExponential: return std::exp(-cfg.alpha * a);
    case StalenessKind::kHinge: return a <= cfg.hinge ? 1.0 : std::pow(1.0 + a, -cfg.alpha);
  }
  throw DomainError("phi: unknown staleness kind");
}

double compute_beta(const ServerState& state, Eigen::Index k, std::int64_t age) {
  const MixingConfig& m = state.cfg.mixing;
  const double raw = state.lambdas[k] * phi(m, age) /
                     std::pow(1.0 + static_cast<double>(state.t), m.decay_exponent);
  return std::clamp(raw, m.beta_min, m.beta_max);
}

const ModelVector& aggregate(ServerState& state, const ModelVector& w_k, double beta) {
  if (w_k.size() != state.w_global.size()) throw ProtocolError("uplink model has the wrong dimension");
  state.w_global = (1.0 - beta) * state.w_global + beta * w_k;
  state.t += 1;
  return state.w_global;
}

AggregationOutcome accept_uplink(ServerState& state, const UplinkPayload& payload) {
  const Eigen::Index k = payload.sender;
  if (k < 0 || k >= state.lambdas.size()) throw ProtocolError("uplink from unknown coworker");
  if (!(payload.mu_bar >= 0.0)) throw ProtocolError("uplink carries a negative multiplier average");

  AggregationOutcome out;
  out.t_before = state.t;
  update_thresholds(state);
  out.th_upper = state.th_upper;
  out.th_lower = state.th_lower;
  out.fairness = apply_fairness_update(state, k, payload.mu_bar);
  update_fairness_stats(state, payload.mu_bar);
  out.age = compute_age(state, payload.timestamp);
  out.beta = compute_beta(state, k, out.age);
  out.g_hat = state.w_global - payload.w;
  aggregate(state, payload.w, out.beta);
  out.stamp = state.t;
  return out;
}

}  // namespace afafed
