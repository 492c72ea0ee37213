#include "afafed/coworker.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace afafed {

void AdaptiveConfig::validate() const {
  if (iter_max < 1) throw ConfigError("adaptive.iter_max must be >= 1");
  if (!(omega_a > 1.0)) throw ConfigError("adaptive.omega_a must be > 1");
  if (!(omega_c > 0.0)) throw ConfigError("adaptive.omega_c must be > 0");
  if (!(b0 > 0.0)) throw ConfigError("adaptive.b0 must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("adaptive.gamma must be >= 0");
  if (!(eta_min > 0.0) || !(eta_max >= eta_min))
    throw ConfigError("adaptive step sizes need 0 < eta_min <= eta_max");
}

CoworkerState CoworkerState::initial(int id, const ModelVector& w0, double lambda0,
                                     const AdaptiveConfig& cfg, StreamBuffer buffer) {
  CoworkerState s(std::move(buffer));
  s.id = id;
  s.w = w0;
  s.w_global_last = w0;
  s.lambda_last = lambda0;
  s.mu = 0.0;
  s.mu_sum = 0.0;
  s.mu_count = 1;
  s.mu_bar = 0.0;
  s.tolerance = tolerance_threshold(cfg, 0.0);
  s.iter = iteration_count(cfg, 0.0);
  s.eta0 = cfg.eta_min;
  s.eta1 = cfg.eta_min;
  s.last_gradient = ModelVector::Zero(w0.size());
  return s;
}

double omega(const AdaptiveConfig& cfg, double mu_bar) {
  const double raw = std::pow(cfg.omega_a, cfg.omega_c * mu_bar);
  return std::max(1.0, std::min(static_cast<double>(cfg.iter_max), raw));
}

double tolerance_threshold(const AdaptiveConfig& cfg, double mu_bar) {
  if (mu_bar <= 0.0) return 0.0;
  return cfg.b0 * std::pow(mu_bar, cfg.gamma);
}

int iteration_count(const AdaptiveConfig& cfg, double mu_bar) {
  const double ratio = static_cast<double>(cfg.iter_max) / omega(cfg, mu_bar);
  return std::max(1, static_cast<int>(std::ceil(ratio)));
}

double constraint_residual(const CoworkerState& state) {
  return (state.w - state.w_global_last).squaredNorm() - state.tolerance;
}

namespace {

void check_finite(const CoworkerState& state) {
  if (!state.w.allFinite() || !std::isfinite(state.mu))
    throw NumericDivergence(state.id, std::nan(""),
                            "numeric divergence at coworker " + std::to_string(state.id));
}

}  // namespace

const ModelVector& primal_step(CoworkerState& state, const ModelVector& grad) {
  if (grad.size() != state.w.size()) throw DomainError("primal_step: dimension mismatch");
  state.w -= state.eta0 * (state.lambda_last * grad + state.mu * (state.w - state.w_global_last));
  check_finite(state);
  return state.w;
}

double dual_step(CoworkerState& state, double residual) {
  state.mu = std::max(0.0, state.mu + state.eta1 * residual);
  check_finite(state);
  return state.mu;
}

double dual_step(CoworkerState& state) { return dual_step(state, constraint_residual(state)); }

double update_mu_average(CoworkerState& state) {
  state.mu_sum += state.mu;
  state.mu_count += 1;
  state.mu_bar = state.mu_sum / static_cast<double>(state.mu_count);
  return state.mu_bar;
}

std::pair<double, double> update_step_sizes(CoworkerState& state, const AdaptiveConfig& cfg,
                                            const ModelVector& grad, double residual) {
  const double om = omega(cfg, state.mu_bar);
  state.eta0 = std::clamp(om * grad.norm(), cfg.eta_min, cfg.eta_max);
  state.eta1 = std::clamp(om * std::abs(residual), cfg.eta_min, cfg.eta_max);
  return {state.eta0, state.eta1};
}

std::pair<double, double> update_step_sizes(CoworkerState& state, const AdaptiveConfig& cfg,
                                            const ModelVector& grad) {
  return update_step_sizes(state, cfg, grad, constraint_residual(state));
}

double update_tolerance(CoworkerState& state, const AdaptiveConfig& cfg) {
  state.tolerance = tolerance_threshold(cfg, state.mu_bar);
  return state.tolerance;
}

int update_iter_count(CoworkerState& state, const AdaptiveConfig& cfg) {
  state.iter = iteration_count(cfg, state.mu_bar);
  return state.iter;
}

IterationOutcome run_one_iteration(CoworkerState& state, const AdaptiveConfig& cfg,
                                   const LossModel& model, Rng& rng) {
  auto batch = state.buffer.sample_minibatch(rng);
  if (!batch) return IterationOutcome::kNotReady;

  ModelVector grad = minibatch_gradient(model, state.w, *batch);
  // Both updates read w_k(t), so the residual is taken before the primal step.
  const double residual = constraint_residual(state);
  update_step_sizes(state, cfg, grad, residual);
  primal_step(state, grad);
  dual_step(state, residual);
  update_mu_average(state);
  state.buffer.evict_oldest_if_surplus();

  state.last_gradient = std::move(grad);
  state.local_clock += 1;
  state.cluster_progress += 1;
  return state.cluster_progress >= state.iter ? IterationOutcome::kClusterComplete
                                              : IterationOutcome::kDone;
}

UplinkPayload finish_cluster(CoworkerState& state, const AdaptiveConfig& cfg) {
  update_tolerance(state, cfg);
  UplinkPayload p;
  p.sender = state.id;
  p.w = state.w;
  p.mu_bar = state.mu_bar;
  p.timestamp = state.timestamp;
  p.cluster_iterations = state.cluster_progress;
  p.local_clock = state.local_clock;
  p.last_gradient = state.last_gradient;
  update_iter_count(state, cfg);
  state.cluster_progress = 0;
  state.phase = CoworkerPhase::kAwaitingFeedback;
  return p;
}

UplinkPayload run_iteration_cluster(CoworkerState& state, const AdaptiveConfig& cfg,
                                    const LossModel& model, Rng& rng) {
  state.phase = CoworkerPhase::kComputing;
  state.cluster_progress = 0;
  for (;;) {
    switch (run_one_iteration(state, cfg, model, rng)) {
      case IterationOutcome::kNotReady:
        throw ProtocolError("run_iteration_cluster: buffer holds fewer than |MB| examples");
      case IterationOutcome::kClusterComplete:
        return finish_cluster(state, cfg);
      case IterationOutcome::kDone:
        break;
    }
  }
}

void handle_downlink(CoworkerState& state, const ModelVector& global_model,
                     std::int64_t stamp) {
  if (global_model.size() != state.w.size())
    throw ProtocolError("downlink model has the wrong dimension");
  state.timestamp = stamp;
  state.w_global_last = global_model;
  state.w = global_model;
  state.timer_deadline.reset();
  ++state.timer_generation;
  state.cluster_progress = 0;
}

void handle_timer_expiry(CoworkerState& state) {
  // Non-persistent policy: the lost payload is not re-sent; a fresh cluster
  // starts from the current local state.
  state.timer_deadline.reset();
  ++state.timer_generation;
  state.cluster_progress = 0;
}

void handle_fairness_broadcast(CoworkerState& state, double lambda_new) {
  if (!(lambda_new >= 0.0 && lambda_new <= 1.0))
    throw ProtocolError("fairness coefficient outside [0, 1]");
  state.lambda_last = lambda_new;
}

}  // namespace afafed
