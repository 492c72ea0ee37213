#include "afafed/network.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace afafed {

std::string to_string(RateKind kind) {
  switch (kind) {
    case RateKind::kConstant: return "constant";
    case RateKind::kUniform: return "uniform";
    case RateKind::kExponential: return "exponential";
  }
  return "unknown";
}

RateKind parse_rate_kind(const std::string& name) {
  if (name == "constant") return RateKind::kConstant;
  if (name == "uniform") return RateKind::kUniform;
  if (name == "exponential") return RateKind::kExponential;
  throw ConfigError("unknown rate distribution '" + name + "'");
}

double RateDistribution::sample(Rng& rng) const {
  switch (kind) {
    case RateKind::kConstant:
      return nominal;
    case RateKind::kUniform: {
      std::uniform_real_distribution<double> u(nominal * (1.0 - spread), nominal * (1.0 + spread));
      return u(rng);
    }
    case RateKind::kExponential: {
      std::exponential_distribution<double> e(1.0 / nominal);
      return e(rng);
    }
  }
  return nominal;
}

void LinkModel::validate() const {
  if (!(p_loss >= 0.0 && p_loss <= 1.0)) throw ConfigError("link.p_loss must lie in [0, 1]");
  if (!(rate.nominal > 0.0) || !std::isfinite(rate.nominal))
    throw ConfigError("link.rate must be positive");
  if (rate.kind == RateKind::kUniform && !(rate.spread >= 0.0 && rate.spread < 1.0))
    throw ConfigError("link.rate_spread must lie in [0, 1)");
  if (payload_bits <= 0) throw ConfigError("link.payload_bits must be positive");
  if (!(downlink_delay >= 0.0)) throw ConfigError("link.downlink_delay must be >= 0");
}

double LinkModel::nominal_round_trip() const {
  return static_cast<double>(payload_bits) / rate.nominal + downlink_delay;
}

std::optional<double> transmit_uplink(const LinkModel& link, Rng& rng) {
  std::bernoulli_distribution lost(link.p_loss);
  if (lost(rng)) return std::nullopt;
  const double r = link.rate.sample(rng);
  const double delay = static_cast<double>(link.payload_bits) / r;
  if (!(delay > 0.0) || !std::isfinite(delay))
    throw EngineInvariantError("uplink delay must be positive and finite");
  return delay;
}

void EventQueue::schedule(double time, EventKind kind) {
  if (!(time >= now_) || !std::isfinite(time))
    throw EngineInvariantError("event scheduled in the past");
  heap_.push(SimEvent{time, next_seq_++, std::move(kind)});
}

SimEvent EventQueue::pop() {
  if (heap_.empty()) throw EngineInvariantError("pop from an empty event queue");
  SimEvent e = heap_.top();
  heap_.pop();
  if (e.time < now_) throw EngineInvariantError("event queue went backwards in time");
  now_ = e.time;
  return e;
}

std::string to_string(ArrivalKind kind) {
  switch (kind) {
    case ArrivalKind::kPoisson: return "poisson";
    case ArrivalKind::kPeriodic: return "periodic";
    case ArrivalKind::kTrace: return "trace";
  }
  return "unknown";
}

ArrivalKind parse_arrival_kind(const std::string& name) {
  if (name == "poisson") return ArrivalKind::kPoisson;
  if (name == "periodic") return ArrivalKind::kPeriodic;
  if (name == "trace") return ArrivalKind::kTrace;
  throw ConfigError("unknown arrival process '" + name + "'");
}

std::vector<TraceRecord> load_arrival_trace(const std::string& path, Eigen::Index feature_dim,
                                            Eigen::Index label_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open arrival trace '" + path + "'");
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        fields.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<Eigen::Index>(fields.size()) != 1 + feature_dim + label_dim)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(1 + feature_dim + label_dim) + " fields");
    TraceRecord r;
    r.time = fields[0];
    if (!records.empty() && r.time < records.back().time)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": arrival times must not decrease");
    r.example.x = Eigen::Map<const ModelVector>(fields.data() + 1, feature_dim);
    r.example.y = Eigen::Map<const ModelVector>(fields.data() + 1 + feature_dim, label_dim);
    records.push_back(std::move(r));
  }
  return records;
}

void ArrivalSpec::validate() const {
  switch (kind) {
    case ArrivalKind::kPoisson:
      if (!(rate > 0.0)) throw ConfigError("arrivals.rate must be positive");
      break;
    case ArrivalKind::kPeriodic:
      if (!(interval > 0.0)) throw ConfigError("arrivals.interval must be positive");
      break;
    case ArrivalKind::kTrace:
      for (double t : trace_times)
        if (!(t >= 0.0)) throw ConfigError("trace arrival times must be non-negative");
      break;
  }
}

ArrivalProcess::ArrivalProcess(ArrivalSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::optional<double> ArrivalProcess::next(double now, Rng& rng) {
  switch (spec_.kind) {
    case ArrivalKind::kPoisson: {
      std::exponential_distribution<double> gap(spec_.rate);
      ++emitted_;
      return now + gap(rng);
    }
    case ArrivalKind::kPeriodic:
      ++emitted_;
      return static_cast<double>(emitted_) * spec_.interval;
    case ArrivalKind::kTrace:
      if (emitted_ >= spec_.trace_times.size()) return std::nullopt;
      return spec_.trace_times[emitted_++];
  }
  return std::nullopt;
}

}  // namespace afafed
