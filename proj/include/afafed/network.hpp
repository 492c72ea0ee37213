#pragma once

#include "afafed/coworker.hpp"
#include "afafed/types.hpp"

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

namespace afafed {

enum class RateKind { kConstant, kUniform, kExponential };

std::string to_string(RateKind kind);
RateKind parse_rate_kind(const std::string& name);

/// Uplink transmission rate law. kUniform draws from
/// [nominal (1 - spread), nominal (1 + spread)]; kExponential has mean
/// `nominal`.
struct RateDistribution {
  RateKind kind = RateKind::kConstant;
  double nominal = 1.0;   // bits per virtual-time unit
  double spread = 0.0;

  double sample(Rng& rng) const;
};

struct LinkModel {
  double p_loss = 0.0;
  RateDistribution rate;
  std::int64_t payload_bits = 64;
  double downlink_delay = 0.0;

  void validate() const;
  /// b_k / R at the nominal rate plus the downlink delay.
  double nominal_round_trip() const;
};

/// Bernoulli loss, then (if delivered) a fresh rate draw. Returns the
/// uplink delay, or std::nullopt when the packet is silently dropped.
std::optional<double> transmit_uplink(const LinkModel& link, Rng& rng);

struct ComputeModel {
  double speed = 1.0;                 // CPU cycles per virtual-time unit
  double cycles_per_iteration = 1.0;

  double iteration_time() const { return cycles_per_iteration / speed; }
  double cluster_time(int iterations) const { return iterations * iteration_time(); }
};

// Event payloads ------------------------------------------------------------

struct DataArrival { int coworker; };
/// End of one local iteration's compute interval; the last one of a cluster
/// completes the cluster.
struct IterationComplete { int coworker; };
struct UplinkDelivery { UplinkPayload payload; };
struct DownlinkDelivery { int coworker; ModelVector model; std::int64_t stamp; };
struct FairnessBroadcastDelivery { int coworker; ModelVector lambdas; };
struct TimerExpiry { int coworker; std::uint64_t generation; };

using EventKind = std::variant<DataArrival, IterationComplete, UplinkDelivery, DownlinkDelivery,
                               FairnessBroadcastDelivery, TimerExpiry>;

struct SimEvent {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind;
};

/// Min-queue on (time, seq); seq is the insertion counter, so equal
/// timestamps resolve in scheduling order.
class EventQueue {
 public:
  /// Throws EngineInvariantError when `time` precedes the current time.
  void schedule(double time, EventKind kind);
  SimEvent pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  double now() const { return now_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

enum class ArrivalKind { kPoisson, kPeriodic, kTrace };

std::string to_string(ArrivalKind kind);
ArrivalKind parse_arrival_kind(const std::string& name);

struct TraceRecord {
  double time;
  TrainingExample example;
};

/// Parses `arrival_time,x_1..x_d,y_1..y_c` lines.
std::vector<TraceRecord> load_arrival_trace(const std::string& path, Eigen::Index feature_dim,
                                            Eigen::Index label_dim);

struct ArrivalSpec {
  ArrivalKind kind = ArrivalKind::kPoisson;
  double rate = 1.0;       // poisson
  double interval = 1.0;   // periodic
  std::vector<double> trace_times;

  void validate() const;
};

/// Arrival-time generator for one coworker.
class ArrivalProcess {
 public:
  explicit ArrivalProcess(ArrivalSpec spec);

  /// Next arrival time after `now`, or std::nullopt when a trace is exhausted.
  std::optional<double> next(double now, Rng& rng);

 private:
  ArrivalSpec spec_;
  std::size_t emitted_ = 0;
};

}  // namespace afafed
