#pragma once

#include "afafed/coworker.hpp"
#include "afafed/model_core.hpp"
#include "afafed/network.hpp"
#include "afafed/profiler.hpp"
#include "afafed/server.hpp"
#include "afafed/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace afafed {

/// What one coworker brings to a run. The shard defines F_k and is replayed
/// cyclically, in order, as the coworker's arrival stream.
struct CoworkerSetup {
  Dataset<double> shard;
  ComputeModel compute;
  LinkModel link;
  ArrivalSpec arrivals;
};

struct SimulationConfig {
  LossModel model;
  AdaptiveConfig adaptive;
  ServerConfig server;
  std::size_t buffer_capacity = 32;
  std::size_t minibatch_size = 16;
  double timer_factor = 3.0;   // timer = factor x nominal round trip
  std::uint64_t seed = 1;
  std::int64_t T = 100;
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t event_budget = std::numeric_limits<std::uint64_t>::max();
  int risk_eval_every = 1;     // 0 disables risk / grad-norm columns
  bool profiling = false;
  std::optional<ModelVector> w0;   // zeros when unset

  void validate() const;
};

/// Stream indices for derive_seed(seed, coworker, stream).
enum class RngStream : std::uint64_t { kSampling = 0, kLink = 1, kArrivals = 2, kProfile = 3 };

struct AggregationRecord {
  std::int64_t t = 0;
  double virtual_time = 0.0;
  int sender = 0;
  std::int64_t age = 0;
  double beta = 0.0;
  std::uint64_t lambda_checksum = 0;
  double fairness_index = 0.0;
  std::optional<double> global_risk;    // at w̄(t), current lambda
  std::optional<double> grad_sqnorm;    // at w̄(t-1), lambda in force before this update
  bool lambda_changed = false;
};

struct CoworkerStats {
  std::uint64_t arrivals = 0;
  std::uint64_t iterations = 0;
  std::uint64_t clusters = 0;
  std::uint64_t attempts = 0;
  std::uint64_t drops = 0;
  std::uint64_t accepted = 0;
  std::uint64_t timer_expiries = 0;
  std::uint64_t late_downlinks = 0;       // downlink that landed mid-cluster
  std::uint64_t stalls_pre_warmup = 0;
  std::uint64_t stalls_post_warmup = 0;
  double iter_sum = 0.0;                  // over accepted clusters
  double iter_sq_sum = 0.0;
  std::optional<double> warm_time;
  double last_iteration_time = 0.0;
};

enum class StopReason { kAggregations, kHorizon, kEventBudget, kQueueEmpty };

std::string to_string(StopReason r);

struct SimulationResult {
  std::vector<AggregationRecord> records;
  std::vector<CoworkerStats> coworkers;
  ModelVector w_initial;
  ModelVector w_final;
  FairnessWeights lambdas_final;
  std::int64_t aggregations = 0;
  std::uint64_t events = 0;
  double end_time = 0.0;
  StopReason stop = StopReason::kQueueEmpty;
  std::optional<ProfilingLog> profile;
};

/// FNV-1a over the bytes of the lambda vector.
std::uint64_t lambda_checksum(const FairnessWeights& lambdas);

class Simulation {
 public:
  Simulation(SimulationConfig cfg, std::vector<CoworkerSetup> setups);

  /// May rewrite a payload after delivery, before the server handles it.
  std::function<void(UplinkPayload&)> on_uplink;
  /// Observes the server right after each accepted aggregation.
  std::function<void(const ServerState&, const AggregationOutcome&, const UplinkPayload&)>
      on_aggregation;

  SimulationResult run();

  const ServerState& server() const { return server_; }
  const CoworkerState& coworker(int k) const { return coworkers_.at(k); }
  const std::vector<Dataset<double>>& shards() const { return shards_; }
  const SimulationConfig& config() const { return cfg_; }

 private:
  void seed_events();
  void dispatch(const SimEvent& e);
  void on_event(const DataArrival& ev);
  void on_event(const IterationComplete& ev);
  void on_event(UplinkDelivery& ev);
  void on_event(const DownlinkDelivery& ev);
  void on_event(const FairnessBroadcastDelivery& ev);
  void on_event(const TimerExpiry& ev);
  void start_cluster(int k);
  void send_uplink(int k, UplinkPayload payload);
  void profiling_epilogue();

  double now() const { return queue_.now(); }
  Rng& rng(int k, RngStream s) { return rngs_[static_cast<std::size_t>(k) * 4 + static_cast<std::size_t>(s)]; }

  SimulationConfig cfg_;
  std::vector<CoworkerSetup> setups_;
  std::vector<Dataset<double>> shards_;
  std::vector<CoworkerState> coworkers_;
  std::vector<ArrivalProcess> arrivals_;
  std::vector<std::uint64_t> stream_pos_;
  std::vector<Rng> rngs_;
  ServerState server_;
  EventQueue queue_;
  SimulationResult result_;
  bool done_ = false;
  bool ran_ = false;
};

}  // namespace afafed
