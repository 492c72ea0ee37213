#pragma once

#include "afafed/model_core.hpp"
#include "afafed/stream_buffer.hpp"
#include "afafed/types.hpp"

#include <cstdint>
#include <optional>
#include <utility>

namespace afafed {

/// Knobs of the coworker-side adaptive rules.
struct AdaptiveConfig {
  int iter_max = 30;
  double omega_a = 2.0;   // base of the max-log Omega function, > 1
  double omega_c = 1.0;   // exponent scale of the max-log Omega function, > 0
  double b0 = 1.0;        // tolerance reference value
  double gamma = 0.1;     // tolerance power-shaping exponent
  double eta_min = 0.01;
  double eta_max = 0.1;

  void validate() const;
};

/// The 3-tuple sent uplink, plus bookkeeping the server side records
/// (cluster length for the iteration moments, last stochastic gradient for
/// the profiler).
struct UplinkPayload {
  int sender = -1;
  ModelVector w;
  double mu_bar = 0.0;
  std::int64_t timestamp = 0;
  int cluster_iterations = 0;
  std::int64_t local_clock = 0;
  ModelVector last_gradient;
};

enum class CoworkerPhase {
  kWaitingForData,      // buffer not warm yet; the only permitted stall
  kComputing,           // inside an iteration cluster
  kAwaitingFeedback,    // uplink sent, timer armed
};

struct CoworkerState {
  explicit CoworkerState(StreamBuffer buf) : buffer(std::move(buf)) {}

  int id = 0;
  ModelVector w;               // local model w_k
  ModelVector w_global_last;   // last received global model
  double mu = 0.0;             // Lagrange multiplier, >= 0
  double mu_sum = 0.0;         // running pieces of the multiplier average
  std::int64_t mu_count = 1;
  double mu_bar = 0.0;
  double tolerance = 0.0;      // B_k
  double lambda_last = 0.0;
  std::int64_t timestamp = 0;
  std::int64_t local_clock = 0;   // t^(k): local iterations performed
  int iter = 1;                   // Iter_k of the current/next cluster
  double eta0 = 0.0;
  double eta1 = 0.0;
  StreamBuffer buffer;
  ModelVector last_gradient;

  CoworkerPhase phase = CoworkerPhase::kWaitingForData;
  int cluster_progress = 0;       // iterations done in the current cluster
  std::optional<double> timer_deadline;
  std::uint64_t timer_generation = 0;

  /// Bootstrap state: w_k = w̄ = w0, mu = 0, Iter_k = Iter_MAX.
  static CoworkerState initial(int id, const ModelVector& w0, double lambda0,
                               const AdaptiveConfig& cfg, StreamBuffer buffer);
};

/// max-log Omega: max{1, min{Iter_MAX, a^(c mu_bar)}}.
double omega(const AdaptiveConfig& cfg, double mu_bar);

/// Theta(mu_bar) = B0 mu_bar^gamma, taken as 0 at the origin.
double tolerance_threshold(const AdaptiveConfig& cfg, double mu_bar);

/// max{1, ceil(Iter_MAX / Omega(mu_bar))}.
int iteration_count(const AdaptiveConfig& cfg, double mu_bar);

/// ||w_k - w̄_last||^2 - B_k.
double constraint_residual(const CoworkerState& state);

/// w_k <- w_k - eta0 [lambda_last grad + mu (w_k - w̄_last)].
const ModelVector& primal_step(CoworkerState& state, const ModelVector& grad);

/// mu <- [mu + eta1 residual]_+ for a given constraint residual.
double dual_step(CoworkerState& state, double residual);
/// Same, with the residual evaluated at the current local model.
double dual_step(CoworkerState& state);

/// Folds the current mu into the running average.
double update_mu_average(CoworkerState& state);

/// Per-iteration step sizes from Omega(mu_bar), ||grad|| and the residual.
std::pair<double, double> update_step_sizes(CoworkerState& state, const AdaptiveConfig& cfg,
                                            const ModelVector& grad);
std::pair<double, double> update_step_sizes(CoworkerState& state, const AdaptiveConfig& cfg,
                                            const ModelVector& grad, double residual);

double update_tolerance(CoworkerState& state, const AdaptiveConfig& cfg);
int update_iter_count(CoworkerState& state, const AdaptiveConfig& cfg);

enum class IterationOutcome { kDone, kClusterComplete, kNotReady };

/// One local primal/dual iteration: sample, step sizes, primal step, dual
/// step, multiplier average, buffer-control eviction. Returns kNotReady
/// without touching the state when the buffer cannot supply a mini-batch.
IterationOutcome run_one_iteration(CoworkerState& state, const AdaptiveConfig& cfg,
                                   const LossModel& model, Rng& rng);

/// Closes the current cluster: refreshes B_k, builds the payload, picks
/// Iter_k for the next cluster.
UplinkPayload finish_cluster(CoworkerState& state, const AdaptiveConfig& cfg);

/// A whole cluster of Iter_k iterations executed back to back.
UplinkPayload run_iteration_cluster(CoworkerState& state, const AdaptiveConfig& cfg,
                                    const LossModel& model, Rng& rng);

void handle_downlink(CoworkerState& state, const ModelVector& global_model,
                     std::int64_t stamp);
void handle_timer_expiry(CoworkerState& state);
void handle_fairness_broadcast(CoworkerState& state, double lambda_new);

}  // namespace afafed
