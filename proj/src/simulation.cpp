#include "afafed/simulation.hpp"

#include <cmath>
#include <cstring>
#include <type_traits>
#include <utility>

namespace afafed {

void SimulationConfig::validate() const {
  adaptive.validate();
  server.mixing.validate();
  if (!(server.safety_margin >= 0.0)) throw ConfigError("fairness safety margin must be >= 0");
  if (minibatch_size == 0 || minibatch_size > buffer_capacity)
    throw ConfigError("buffer.minibatch must lie in [1, buffer.capacity]");
  if (!(timer_factor > 0.0)) throw ConfigError("link.timer_factor must be positive");
  if (T < 1) throw ConfigError("sim.T must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("sim.horizon must be positive");
  if (risk_eval_every < 0) throw ConfigError("eval.risk_eval_every must be >= 0");
  if (model.dim < 1) throw ConfigError("model.dim must be >= 1");
  if (w0 && w0->size() != model.dim) throw ConfigError("initial model has the wrong dimension");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kAggregations: return "aggregations";
    case StopReason::kHorizon: return "horizon";
    case StopReason::kEventBudget: return "event_budget";
    case StopReason::kQueueEmpty: return "queue_empty";
  }
  return "unknown";
}

std::uint64_t lambda_checksum(const FairnessWeights& lambdas) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    const double v = lambdas[i];
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Simulation::Simulation(SimulationConfig cfg, std::vector<CoworkerSetup> setups)
    : cfg_(std::move(cfg)), setups_(std::move(setups)) {
  cfg_.validate();
  if (setups_.empty()) throw ConfigError("topology.K must be >= 1");
  const ModelVector w0 = cfg_.w0 ? *cfg_.w0 : ModelVector::Zero(cfg_.model.dim);
  const auto k_total = static_cast<Eigen::Index>(setups_.size());
  server_ = ServerState::initial(w0, k_total, cfg_.server);

  for (std::size_t k = 0; k < setups_.size(); ++k) {
    auto& s = setups_[k];
    if (s.shard.empty()) throw ConfigError("coworker " + std::to_string(k) + " has an empty shard");
    s.link.validate();
    if (!(s.compute.speed > 0.0) || !(s.compute.cycles_per_iteration > 0.0))
      throw ConfigError("compute.speed and compute.cycles_per_iteration must be positive");
    shards_.push_back(s.shard);
    coworkers_.push_back(CoworkerState::initial(static_cast<int>(k), w0, server_.lambdas[k],
                                                cfg_.adaptive,
                                                StreamBuffer(cfg_.buffer_capacity, cfg_.minibatch_size)));
    arrivals_.emplace_back(s.arrivals);
    stream_pos_.push_back(0);
    for (std::uint64_t stream = 0; stream < 4; ++stream)
      rngs_.emplace_back(derive_seed(cfg_.seed, k, stream));
  }
  result_.coworkers.resize(setups_.size());
  result_.w_initial = w0;
}

void Simulation::seed_events() {
  for (std::size_t k = 0; k < setups_.size(); ++k) {
    const int id = static_cast<int>(k);
    if (auto t = arrivals_[k].next(0.0, rng(id, RngStream::kArrivals)))
      queue_.schedule(*t, DataArrival{id});
  }
}

SimulationResult Simulation::run() {
  if (ran_) throw EngineInvariantError("Simulation::run called twice");
  ran_ = true;
  if (cfg_.profiling) result_.profile.emplace(cfg_.model.dim);
  seed_events();

  while (!done_) {
    if (queue_.empty()) {
      result_.stop = StopReason::kQueueEmpty;
      break;
    }
    if (result_.events >= cfg_.event_budget) {
      result_.stop = StopReason::kEventBudget;
      break;
    }
    SimEvent e = queue_.pop();
    if (e.time > cfg_.horizon) {
      result_.stop = StopReason::kHorizon;
      break;
    }
    ++result_.events;
    dispatch(e);
  }
  if (done_) result_.stop = StopReason::kAggregations;

  result_.end_time = result_.stop == StopReason::kHorizon ? cfg_.horizon : now();
  result_.aggregations = server_.t;
  result_.w_final = server_.w_global;
  result_.lambdas_final = server_.lambdas;
  if (cfg_.profiling) profiling_epilogue();
  return std::move(result_);
}

void Simulation::dispatch(const SimEvent& e) {
  SimEvent ev = e;
  std::visit([this](auto& payload) { on_event(payload); }, ev.kind);
}

void Simulation::on_event(const DataArrival& ev) {
  const int k = ev.coworker;
  auto& cw = coworkers_[k];
  auto& st = result_.coworkers[k];
  const auto& shard = shards_[k];
  const std::uint64_t idx = stream_pos_[k]++;
  cw.buffer.admit(shard[idx % shard.size()], idx);
  ++st.arrivals;
  if (!st.warm_time && cw.buffer.warm()) st.warm_time = now();

  if (auto t = arrivals_[k].next(now(), rng(k, RngStream::kArrivals)))
    queue_.schedule(*t, DataArrival{k});

  if (cw.phase == CoworkerPhase::kWaitingForData && cw.buffer.warm()) start_cluster(k);
}

void Simulation::start_cluster(int k) {
  auto& cw = coworkers_[k];
  cw.phase = CoworkerPhase::kComputing;
  cw.cluster_progress = 0;
  queue_.schedule(now() + setups_[k].compute.iteration_time(), IterationComplete{k});
}

void Simulation::on_event(const IterationComplete& ev) {
  const int k = ev.coworker;
  auto& cw = coworkers_[k];
  auto& st = result_.coworkers[k];
  if (cw.phase != CoworkerPhase::kComputing) throw EngineInvariantError("iteration outside a cluster");

  IterationOutcome outcome;
  try {
    outcome = run_one_iteration(cw, cfg_.adaptive, cfg_.model, rng(k, RngStream::kSampling));
  } catch (const NumericDivergence& err) {
    throw NumericDivergence(k, now(), err.what());
  }

  switch (outcome) {
    case IterationOutcome::kNotReady:
      if (cw.buffer.ever_warm())
        ++st.stalls_post_warmup;
      else
        ++st.stalls_pre_warmup;
      cw.phase = CoworkerPhase::kWaitingForData;
      return;
    case IterationOutcome::kDone:
      ++st.iterations;
      st.last_iteration_time = now();
      queue_.schedule(now() + setups_[k].compute.iteration_time(), IterationComplete{k});
      return;
    case IterationOutcome::kClusterComplete:
      ++st.iterations;
      st.last_iteration_time = now();
      ++st.clusters;
      send_uplink(k, finish_cluster(cw, cfg_.adaptive));
      return;
  }
}

void Simulation::send_uplink(int k, UplinkPayload payload) {
  auto& cw = coworkers_[k];
  auto& st = result_.coworkers[k];
  const LinkModel& link = setups_[k].link;
  ++st.attempts;
  if (auto delay = transmit_uplink(link, rng(k, RngStream::kLink)))
    queue_.schedule(now() + *delay, UplinkDelivery{std::move(payload)});
  else
    ++st.drops;
  const double deadline = now() + cfg_.timer_factor * link.nominal_round_trip();
  cw.timer_deadline = deadline;
  queue_.schedule(deadline, TimerExpiry{k, cw.timer_generation});
}

void Simulation::on_event(UplinkDelivery& ev) {
  if (on_uplink) on_uplink(ev.payload);
  const UplinkPayload& p = ev.payload;
  const int k = p.sender;
  if (k < 0 || k >= static_cast<int>(coworkers_.size())) throw ProtocolError("uplink from unknown coworker");

  const bool eval = cfg_.risk_eval_every > 0 && (server_.t + 1) % cfg_.risk_eval_every == 0;
  std::optional<double> grad_sq;
  if (eval)
    grad_sq = global_gradient(cfg_.model, server_.w_global, std::span<const Dataset<double>>(shards_),
                              server_.lambdas)
                  .squaredNorm();

  const AggregationOutcome out = accept_uplink(server_, p);
  auto& st = result_.coworkers[k];
  ++st.accepted;
  st.iter_sum += p.cluster_iterations;
  st.iter_sq_sum += static_cast<double>(p.cluster_iterations) * p.cluster_iterations;
  if (result_.profile) result_.profile->record_aggregation(out.g_hat, p.last_gradient);

  AggregationRecord rec;
  rec.t = out.stamp;
  rec.virtual_time = now();
  rec.sender = k;
  rec.age = out.age;
  rec.beta = out.beta;
  rec.lambda_checksum = lambda_checksum(server_.lambdas);
  rec.fairness_index = jain_fairness_index(server_.lambdas);
  rec.lambda_changed = out.fairness != FairnessAction::kUnchanged;
  if (eval) {
    rec.global_risk = global_risk(cfg_.model, server_.w_global,
                                  std::span<const Dataset<double>>(shards_), server_.lambdas);
    rec.grad_sqnorm = grad_sq;
  }
  result_.records.push_back(rec);

  if (rec.lambda_changed) {
    for (std::size_t j = 0; j < coworkers_.size(); ++j)
      queue_.schedule(now() + setups_[j].link.downlink_delay,
                      FairnessBroadcastDelivery{static_cast<int>(j), server_.lambdas.values()});
  }
  queue_.schedule(now() + setups_[k].link.downlink_delay,
                  DownlinkDelivery{k, server_.w_global, out.stamp});

  if (on_aggregation) on_aggregation(server_, out, p);
  if (server_.t >= cfg_.T) done_ = true;
}

void Simulation::on_event(const DownlinkDelivery& ev) {
  auto& cw = coworkers_[ev.coworker];
  const CoworkerPhase phase = cw.phase;
  handle_downlink(cw, ev.model, ev.stamp);
  if (phase == CoworkerPhase::kAwaitingFeedback)
    start_cluster(ev.coworker);
  else if (phase == CoworkerPhase::kComputing)
    ++result_.coworkers[ev.coworker].late_downlinks;
}

void Simulation::on_event(const FairnessBroadcastDelivery& ev) {
  handle_fairness_broadcast(coworkers_[ev.coworker], ev.lambdas(ev.coworker));
}

void Simulation::on_event(const TimerExpiry& ev) {
  auto& cw = coworkers_[ev.coworker];
  if (ev.generation != cw.timer_generation || cw.phase != CoworkerPhase::kAwaitingFeedback) return;
  handle_timer_expiry(cw);
  ++result_.coworkers[ev.coworker].timer_expiries;
  start_cluster(ev.coworker);
}

void Simulation::profiling_epilogue() {
  ProfilingLog& log = *result_.profile;
  const ModelVector& wbar0 = result_.w_initial;
  const ModelVector& wbarT = result_.w_final;
  for (std::size_t k = 0; k < coworkers_.size(); ++k) {
    const int id = static_cast<int>(k);
    CoworkerProfile p;
    p.coworker = id;
    p.F0 = local_risk(cfg_.model, wbar0, shards_[k]);
    p.FT = local_risk(cfg_.model, wbarT, shards_[k]);
    if (auto batch = coworkers_[k].buffer.sample_minibatch(rng(id, RngStream::kProfile)))
      p.zeta = secant_ratio(cfg_.model, *batch, wbar0, coworkers_[k].w, wbar0, wbarT);
    log.add_coworker_profile(p);
  }
}

}  // namespace afafed
