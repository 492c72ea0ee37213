#include "afafed/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace afafed {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why + " (got '" + value + "')");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "not a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, "not a number");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) bad_value(key, v, "not an integer");
    return i;
  } catch (const std::logic_error&) {
    bad_value(key, v, "not an integer");
  }
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  if (out.empty()) bad_value(key, v, "empty list");
  return out;
}

template <typename Fn>
auto keyed(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config key", 0) == 0) throw;
    throw ConfigError("config key '" + key + "': " + msg);
  }
}

}  // namespace

double ExperimentConfig::per_coworker(const std::vector<double>& values, int k,
                                      const std::string& key) const {
  if (values.size() == 1) return values[0];
  if (values.size() == static_cast<std::size_t>(K)) return values[k];
  if (values.size() == categories.size()) return values[category_of(k)];
  throw ConfigError("config key '" + key + "': list needs 1, " + std::to_string(categories.size()) +
                    " (categories) or " + std::to_string(K) + " (K) entries");
}

int ExperimentConfig::category_of(int k) const {
  int upto = 0;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    upto += categories[c];
    if (k < upto) return static_cast<int>(c);
  }
  throw ConfigError("coworker index outside the category table");
}

void ExperimentConfig::validate() const {
  if (K < 1) throw ConfigError("config key 'topology.K': must be >= 1");
  if (categories.empty() || std::accumulate(categories.begin(), categories.end(), 0) != K)
    throw ConfigError("config key 'topology.categories': counts must sum to K");
  for (int c : categories)
    if (c < 0) throw ConfigError("config key 'topology.categories': negative count");
  const std::pair<const char*, const std::vector<double>*> lists[] = {
      {"link.p_loss", &p_loss}, {"link.rate", &rate}, {"compute.speed", &speed},
      {"compute.cycles_per_iteration", &cycles_per_iteration}, {"arrivals.rate", &arrival_rate},
      {"arrivals.interval", &arrival_interval}};
  for (const auto& [key, list] : lists)
    for (int k = 0; k < K; ++k) per_coworker(*list, k, key);
  for (int k = 0; k < K; ++k) {
    const double p = per_coworker(p_loss, k, "link.p_loss");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("config key 'link.p_loss': must lie in [0, 1]");
    if (!(per_coworker(rate, k, "link.rate") > 0.0))
      throw ConfigError("config key 'link.rate': must be positive");
    if (!(per_coworker(speed, k, "compute.speed") > 0.0))
      throw ConfigError("config key 'compute.speed': must be positive");
    if (!(per_coworker(cycles_per_iteration, k, "compute.cycles_per_iteration") > 0.0))
      throw ConfigError("config key 'compute.cycles_per_iteration': must be positive");
    if (arrival_kind == ArrivalKind::kPoisson && !(per_coworker(arrival_rate, k, "arrivals.rate") > 0.0))
      throw ConfigError("config key 'arrivals.rate': must be positive");
    if (arrival_kind == ArrivalKind::kPeriodic &&
        !(per_coworker(arrival_interval, k, "arrivals.interval") > 0.0))
      throw ConfigError("config key 'arrivals.interval': must be positive");
  }
  if (arrival_kind == ArrivalKind::kTrace && trace.empty())
    throw ConfigError("config key 'arrivals.trace': required for trace arrivals");
  if (rate_kind == RateKind::kUniform && !(rate_spread >= 0.0 && rate_spread < 1.0))
    throw ConfigError("config key 'link.rate_spread': must lie in [0, 1)");
  if (payload_bits < 0) throw ConfigError("config key 'link.payload_bits': must be >= 0");
  if (!(downlink_delay >= 0.0)) throw ConfigError("config key 'link.downlink_delay': must be >= 0");
  if (!(timer_factor > 0.0)) throw ConfigError("config key 'link.timer_factor': must be positive");
  if (dim < 1) throw ConfigError("config key 'model.dim': must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("config key 'model.noise': must be >= 0");
  if (examples_per_coworker < 1)
    throw ConfigError("config key 'model.examples_per_coworker': must be >= 1");
  if (classes < 1) throw ConfigError("config key 'model.classes': must be >= 1");
  if (partition.kind == PartitionKind::kLabelSkew &&
      (partition.classes_per_coworker < 1 || partition.classes_per_coworker > classes))
    throw ConfigError("config key 'partition.classes_per_coworker': must lie in [1, model.classes]");
  keyed("adaptive", [&] { adaptive.validate(); return 0; });
  keyed("mixing", [&] { mixing.validate(); return 0; });
  if (!(safety_margin >= 0.0)) throw ConfigError("config key 'fairness.safety_margin': must be >= 0");
  if (minibatch < 1 || minibatch > buffer_capacity)
    throw ConfigError("config key 'buffer.minibatch': must lie in [1, buffer.capacity]");
  if (T < 1) throw ConfigError("config key 'sim.T': must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("config key 'sim.horizon': must be positive");
  if (risk_eval_every < 0) throw ConfigError("config key 'eval.risk_eval_every': must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("config key 'bound.epsilon': must lie in (0, 1)");
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "table_a1_small") return cfg;
  if (name == "table_a1") {
    cfg.K = 100;
    cfg.categories = {30, 40, 30};
    cfg.minibatch = 32;
    cfg.buffer_capacity = 64;
    return cfg;
  }
  throw ConfigError("config key 'preset': unknown preset '" + name + "'");
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto d = [&] { return to_double(key, v); };
  auto i = [&] { return to_int(key, v); };
  auto l = [&] { return to_list(key, v); };
  auto positive_int = [&] {
    const auto x = i();
    if (x < 1) bad_value(key, v, "must be >= 1");
    return x;
  };

  if (key == "topology.K") {
    const int k = static_cast<int>(positive_int());
    if (k != c.K) {
      // A single category replaces the old table; per-category lists keep
      // their first-category value.
      const std::size_t old = c.categories.size();
      for (auto* list : {&c.p_loss, &c.rate, &c.speed, &c.cycles_per_iteration, &c.arrival_rate,
                         &c.arrival_interval})
        if (list->size() == old && old > 1) list->resize(1);
      c.K = k;
      c.categories = {k};
    }
  } else if (key == "topology.categories") {
    c.categories.clear();
    for (double x : l()) c.categories.push_back(static_cast<int>(x));
  } else if (key == "link.p_loss") c.p_loss = l();
  else if (key == "link.rate") c.rate = l();
  else if (key == "link.rate_dist") c.rate_kind = keyed(key, [&] { return parse_rate_kind(v); });
  else if (key == "link.rate_spread") c.rate_spread = d();
  else if (key == "link.payload_bits") c.payload_bits = i();
  else if (key == "link.downlink_delay") c.downlink_delay = d();
  else if (key == "link.timer_factor") c.timer_factor = d();
  else if (key == "compute.speed") c.speed = l();
  else if (key == "compute.cycles_per_iteration") c.cycles_per_iteration = l();
  else if (key == "arrivals.kind") c.arrival_kind = keyed(key, [&] { return parse_arrival_kind(v); });
  else if (key == "arrivals.rate") c.arrival_rate = l();
  else if (key == "arrivals.interval") c.arrival_interval = l();
  else if (key == "arrivals.trace") c.trace = v;
  else if (key == "model.kind") c.loss = keyed(key, [&] { return parse_loss_kind(v); });
  else if (key == "model.dim") c.dim = static_cast<int>(positive_int());
  else if (key == "model.noise") c.noise = d();
  else if (key == "model.examples_per_coworker") c.examples_per_coworker = static_cast<int>(positive_int());
  else if (key == "model.classes") c.classes = static_cast<int>(positive_int());
  else if (key == "model.class_separation") c.class_separation = d();
  else if (key == "model.data_seed") c.data_seed = static_cast<std::uint64_t>(i());
  else if (key == "partition.kind") {
    if (v == "iid") {
      c.partition.kind = PartitionKind::kIid;
    } else if (v == "label_skew") {
      c.partition.kind = PartitionKind::kLabelSkew;
    } else if (v == "1-noniid" || v == "2-noniid") {
      c.partition.kind = PartitionKind::kLabelSkew;
      c.partition.classes_per_coworker = v[0] - '0';
    } else {
      bad_value(key, v, "expected iid, label_skew, 1-noniid or 2-noniid");
    }
  } else if (key == "partition.classes_per_coworker") c.partition.classes_per_coworker = static_cast<int>(positive_int());
  else if (key == "adaptive.iter_max") c.adaptive.iter_max = static_cast<int>(positive_int());
  else if (key == "adaptive.omega_a") c.adaptive.omega_a = d();
  else if (key == "adaptive.omega_c") c.adaptive.omega_c = d();
  else if (key == "adaptive.b0") c.adaptive.b0 = d();
  else if (key == "adaptive.gamma") c.adaptive.gamma = d();
  else if (key == "adaptive.eta_min") c.adaptive.eta_min = d();
  else if (key == "adaptive.eta_max") c.adaptive.eta_max = d();
  else if (key == "mixing.beta_min") c.mixing.beta_min = d();
  else if (key == "mixing.beta_max") c.mixing.beta_max = d();
  else if (key == "mixing.decay_exponent") c.mixing.decay_exponent = d();
  else if (key == "mixing.phi") c.mixing.phi = keyed(key, [&] { return parse_staleness_kind(v); });
  else if (key == "mixing.alpha") c.mixing.alpha = d();
  else if (key == "mixing.hinge") c.mixing.hinge = d();
  else if (key == "fairness.safety_margin") c.safety_margin = d();
  else if (key == "buffer.capacity") c.buffer_capacity = static_cast<std::size_t>(positive_int());
  else if (key == "buffer.minibatch") c.minibatch = static_cast<std::size_t>(positive_int());
  else if (key == "sim.seed") c.seed = static_cast<std::uint64_t>(i());
  else if (key == "sim.T") c.T = positive_int();
  else if (key == "sim.horizon") c.horizon = d();
  else if (key == "sim.event_budget") c.event_budget = static_cast<std::uint64_t>(positive_int());
  else if (key == "eval.risk_eval_every") c.risk_eval_every = static_cast<int>(i());
  else if (key == "bound.epsilon") c.epsilon = d();
  else throw ConfigError("config key '" + key + "': unknown key");
}

ExperimentConfig load_config(const fs::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  ExperimentConfig cfg;
  std::vector<std::pair<std::string, std::string>> settings;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name == "preset")
        cfg = preset(trim(node.data()));
      else
        throw ConfigError("config key '" + name + "': unknown top-level key");
      continue;
    }
    for (const auto& [key, leaf] : node) settings.emplace_back(name + "." + key, leaf.data());
  }
  // K first: it resets the category table that a later key may refine.
  std::stable_partition(settings.begin(), settings.end(),
                        [](const auto& s) { return s.first == "topology.K"; });
  for (const auto& [key, value] : settings) apply_setting(cfg, key, value);
  cfg.validate();
  return cfg;
}

std::vector<Dataset<double>> generate_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t ds = cfg.effective_data_seed();
  std::normal_distribution<double> normal(0.0, 1.0);
  Rng global(derive_seed(ds, 0xDA7A, 0));
  const ModelVector w_true = ModelVector::NullaryExpr(cfg.dim, [&] { return normal(global); });
  std::vector<ModelVector> centers;
  for (int c = 0; c < cfg.classes; ++c)
    centers.push_back(cfg.class_separation *
                      ModelVector::NullaryExpr(cfg.dim, [&] { return normal(global); }));

  std::vector<Dataset<double>> shards(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    Rng r(derive_seed(ds, 0xDA7A, static_cast<std::uint64_t>(k) + 1));
    std::vector<int> allowed;
    if (cfg.partition.kind == PartitionKind::kIid) {
      allowed.resize(cfg.classes);
      std::iota(allowed.begin(), allowed.end(), 0);
    } else {
      for (int j = 0; j < cfg.partition.classes_per_coworker; ++j)
        allowed.push_back((k * cfg.partition.classes_per_coworker + j) % cfg.classes);
    }
    std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
    auto& shard = shards[k];
    shard.reserve(cfg.examples_per_coworker);
    for (int n = 0; n < cfg.examples_per_coworker; ++n) {
      TrainingExample e;
      e.label_class = allowed[pick(r)];
      e.x = centers[e.label_class] + ModelVector::NullaryExpr(cfg.dim, [&] { return normal(r); });
      e.y.resize(1);
      if (cfg.loss == LossKind::kQuadratic)
        e.y(0) = w_true.dot(e.x) + cfg.noise * normal(r);
      else
        e.y(0) = static_cast<double>(e.label_class % 2);
      shard.push_back(std::move(e));
    }
  }
  return shards;
}

SimulationInputs build_inputs(const ExperimentConfig& cfg, bool profiling) {
  cfg.validate();
  SimulationInputs in;
  auto& s = in.sim;
  s.model = LossModel{cfg.loss, cfg.dim};
  s.adaptive = cfg.adaptive;
  s.server.mixing = cfg.mixing;
  s.server.safety_margin = cfg.safety_margin;
  s.buffer_capacity = cfg.buffer_capacity;
  s.minibatch_size = cfg.minibatch;
  s.timer_factor = cfg.timer_factor;
  s.seed = cfg.seed;
  s.T = cfg.T;
  s.horizon = cfg.horizon;
  s.event_budget = cfg.event_budget;
  s.risk_eval_every = cfg.risk_eval_every;
  s.profiling = profiling;

  std::vector<Dataset<double>> shards;
  std::vector<std::vector<double>> trace_times(cfg.K);
  if (cfg.arrival_kind == ArrivalKind::kTrace) {
    for (int k = 0; k < cfg.K; ++k) {
      std::string path = cfg.trace;
      if (auto pos = path.find("{k}"); pos != std::string::npos) path.replace(pos, 3, std::to_string(k));
      Dataset<double> shard;
      for (auto& r : load_arrival_trace(path, cfg.dim, 1)) {
        trace_times[k].push_back(r.time);
        shard.push_back(std::move(r.example));
      }
      shards.push_back(std::move(shard));
    }
  } else {
    shards = generate_data(cfg);
  }

  const std::int64_t bits = cfg.payload_bits > 0 ? cfg.payload_bits : 64 * (cfg.dim + 2);
  for (int k = 0; k < cfg.K; ++k) {
    CoworkerSetup cs;
    cs.shard = std::move(shards[k]);
    cs.compute.speed = cfg.per_coworker(cfg.speed, k, "compute.speed");
    cs.compute.cycles_per_iteration =
        cfg.per_coworker(cfg.cycles_per_iteration, k, "compute.cycles_per_iteration");
    cs.link.p_loss = cfg.per_coworker(cfg.p_loss, k, "link.p_loss");
    cs.link.rate = RateDistribution{cfg.rate_kind, cfg.per_coworker(cfg.rate, k, "link.rate"),
                                    cfg.rate_spread};
    cs.link.payload_bits = bits;
    cs.link.downlink_delay = cfg.downlink_delay;
    cs.arrivals.kind = cfg.arrival_kind;
    cs.arrivals.rate = cfg.per_coworker(cfg.arrival_rate, k, "arrivals.rate");
    cs.arrivals.interval = cfg.per_coworker(cfg.arrival_interval, k, "arrivals.interval");
    cs.arrivals.trace_times = std::move(trace_times[k]);
    in.setups.push_back(std::move(cs));
  }
  return in;
}

RunSummary summarize(const SimulationResult& r, const FairnessWeights& lambdas) {
  RunSummary s;
  s.aggregations = r.aggregations;
  s.events = r.events;
  s.end_time = r.end_time;
  s.stop = r.stop;
  std::uint64_t accepted = 0;
  double iter_sum = 0.0, iter_sq = 0.0;
  for (const auto& c : r.coworkers) {
    s.attempts += c.attempts;
    s.drops += c.drops;
    accepted += c.accepted;
    iter_sum += c.iter_sum;
    iter_sq += c.iter_sq_sum;
    s.iterations += c.iterations;
    s.stalls_pre_warmup += c.stalls_pre_warmup;
    s.stalls_post_warmup += c.stalls_post_warmup;
    s.timer_expiries += c.timer_expiries;
  }
  for (const auto& c : r.coworkers)
    s.access_probability.push_back(accepted ? static_cast<double>(c.accepted) / accepted : 0.0);
  if (accepted) {
    s.I_bar = iter_sum / accepted;
    s.I2_bar = iter_sq / accepted;
  }
  double g_sum = 0.0;
  std::size_t g_n = 0;
  for (const auto& rec : r.records) {
    if (rec.global_risk) s.final_risk = rec.global_risk;
    if (rec.grad_sqnorm) {
      g_sum += *rec.grad_sqnorm;
      ++g_n;
    }
  }
  if (g_n) s.mean_grad_sqnorm = g_sum / static_cast<double>(g_n);
  if (r.profile) s.estimates = finalize(*r.profile, lambdas);
  return s;
}

void write_metrics_csv(std::ostream& out, const std::vector<AggregationRecord>& records) {
  out << kMetricsHeader << '\n';
  char checksum[32];
  for (const auto& r : records) {
    std::snprintf(checksum, sizeof checksum, "%016" PRIx64, r.lambda_checksum);
    out << r.t << ',' << format_double(r.virtual_time) << ',' << r.sender << ',' << r.age << ','
        << format_double(r.beta) << ',' << checksum << ',' << format_double(r.fairness_index) << ','
        << (r.global_risk ? format_double(*r.global_risk) : "") << ','
        << (r.grad_sqnorm ? format_double(*r.grad_sqnorm) : "") << '\n';
  }
}

namespace {

void put_optional(std::ostream& out, const char* key, const std::optional<double>& v) {
  if (v) out << key << " = " << format_double(*v) << '\n';
}

const char* flag(bool b) { return b ? "true" : "false"; }

}  // namespace

void write_estimates(std::ostream& out, const ParameterEstimates& e) {
  out << "[estimates]\n";
  out << "feasible = " << flag(e.feasible()) << '\n';
  out << "inner_positive = " << flag(e.inner_positive) << '\n';
  out << "k0_nonnegative = " << flag(e.k0_nonnegative) << '\n';
  out << "variance_surplus = " << flag(e.variance_surplus) << '\n';
  out << "c_defined = " << flag(e.c_defined) << '\n';
  out << "zeta_defined = " << flag(e.zeta_defined) << '\n';
  out << "inner = " << format_double(e.inner) << '\n';
  out << "k0 = " << format_double(e.k0) << '\n';
  out << "g_norm_mean = " << format_double(e.g_norm_mean) << '\n';
  out << "g_sqnorm_mean = " << format_double(e.g_sqnorm_mean) << '\n';
  out << "grad_hat_sqnorm = "
      << format_double(e.grad_hat.size() ? e.grad_hat.squaredNorm() : 0.0) << '\n';
  put_optional(out, "C_hat", e.C_hat);
  put_optional(out, "Gamma_hat", e.Gamma_hat);
  put_optional(out, "A_hat", e.A_hat);
  put_optional(out, "zeta_hat", e.zeta_hat);
  put_optional(out, "F0_hat", e.F0_hat);
  put_optional(out, "F_star_hat", e.F_star_hat);
}

void write_summary(std::ostream& out, const RunSummary& s) {
  out << "[run]\n";
  out << "aggregations = " << s.aggregations << '\n';
  out << "attempts = " << s.attempts << '\n';
  out << "drops = " << s.drops << '\n';
  out << "events = " << s.events << '\n';
  out << "end_time = " << format_double(s.end_time) << '\n';
  out << "stop = " << to_string(s.stop) << '\n';
  put_optional(out, "final_risk", s.final_risk);
  put_optional(out, "mean_grad_sqnorm", s.mean_grad_sqnorm);
  out << "iterations = " << s.iterations << '\n';
  out << "stalls_pre_warmup = " << s.stalls_pre_warmup << '\n';
  out << "stalls_post_warmup = " << s.stalls_post_warmup << '\n';
  out << "timer_expiries = " << s.timer_expiries << '\n';
  out << "\n[access]\n";
  for (std::size_t k = 0; k < s.access_probability.size(); ++k)
    out << "P_" << k << " = " << format_double(s.access_probability[k]) << '\n';
  out << "\n[ensemble]\n";
  out << "I_bar = " << format_double(s.I_bar) << '\n';
  out << "I2_bar = " << format_double(s.I2_bar) << '\n';
  if (s.estimates) {
    out << '\n';
    write_estimates(out, *s.estimates);
  }
}

std::optional<BoundInputs<double>> bound_inputs_from(const ParameterEstimates& e, const RunSummary& s,
                                                     const ExperimentConfig& cfg) {
  if (!e.feasible() || !e.zeta_hat || !e.F0_hat || !e.F_star_hat || !(s.I_bar > 0.0)) return std::nullopt;
  BoundInputs<double> in;
  in.C = *e.C_hat;
  in.Gamma = *e.Gamma_hat;
  in.A = *e.A_hat;
  in.zeta = *e.zeta_hat;
  in.F0 = *e.F0_hat;
  in.F_star = *e.F_star_hat;
  in.epsilon = cfg.epsilon;
  in.beta_min = cfg.mixing.beta_min;
  in.beta_max = cfg.mixing.beta_max;
  in.T = std::max<std::int64_t>(1, s.aggregations);
  in.sigma2_bar = 1.0;
  in.I_bar = s.I_bar;
  in.I2_bar = s.I2_bar;
  in.p_loss_bar = s.attempts ? static_cast<double>(s.drops) / s.attempts : 0.0;
  in.C0 = in.C / s.I_bar;
  in.Gamma0 = in.Gamma / s.I_bar;
  in.A0 = in.A / s.I2_bar;
  return in;
}

void write_bound_params(std::ostream& out, const BoundInputs<double>& in) {
  out << "[bound]\n";
  const std::pair<const char*, double> rows[] = {
      {"C", in.C}, {"Gamma", in.Gamma}, {"A", in.A}, {"zeta", in.zeta}, {"F0", in.F0},
      {"F_star", in.F_star}, {"epsilon", in.epsilon}, {"beta_min", in.beta_min},
      {"beta_max", in.beta_max}, {"sigma2_bar", in.sigma2_bar}, {"I_bar", in.I_bar},
      {"I2_bar", in.I2_bar}, {"p_loss_bar", in.p_loss_bar}, {"C0", in.C0},
      {"Gamma0", in.Gamma0}, {"A0", in.A0}};
  for (const auto& [k, v] : rows) out << k << " = " << format_double(v) << '\n';
  out << "T = " << in.T << '\n';
}

BoundInputs<double> load_bound_params(const fs::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read bound parameters: ") + e.what());
  }
  BoundInputs<double> in;
  const std::map<std::string, double*> fields = {
      {"C", &in.C}, {"Gamma", &in.Gamma}, {"A", &in.A}, {"zeta", &in.zeta}, {"F0", &in.F0},
      {"F_star", &in.F_star}, {"epsilon", &in.epsilon}, {"beta_min", &in.beta_min},
      {"beta_max", &in.beta_max}, {"sigma2_bar", &in.sigma2_bar}, {"I_bar", &in.I_bar},
      {"I2_bar", &in.I2_bar}, {"p_loss_bar", &in.p_loss_bar}, {"C0", &in.C0},
      {"Gamma0", &in.Gamma0}, {"A0", &in.A0}};
  for (const auto& [section, node] : tree) {
    if (section != "bound") throw ConfigError("bound parameters: unknown section '" + section + "'");
    for (const auto& [key, leaf] : node) {
      const std::string full = "bound." + key;
      if (key == "T") {
        in.T = to_int(full, trim(leaf.data()));
      } else if (auto it = fields.find(key); it != fields.end()) {
        *it->second = to_double(full, trim(leaf.data()));
      } else {
        throw ConfigError("config key '" + full + "': unknown key");
      }
    }
  }
  return in;
}

BoundReport evaluate_bounds(const BoundInputs<double>& in) {
  BoundReport r;
  r.beta_max_admissible = beta_max_admissible(in);
  r.constant = bound_constant_beta(in, in.beta_max);
  r.clipped = bound_clipped_beta(in);
  r.scaled = bound_scaled(in);
  return r;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

struct RunOutput {
  SimulationResult result;
  RunSummary summary;
};

RunOutput run_once(const ExperimentConfig& cfg, bool profiling, const fs::path& out_dir) {
  SimulationInputs in = build_inputs(cfg, profiling);
  Simulation sim(std::move(in.sim), std::move(in.setups));
  RunOutput o;
  o.result = sim.run();
  o.summary = summarize(o.result, o.result.lambdas_final);
  fs::create_directories(out_dir);
  std::ostringstream csv, summary;
  write_metrics_csv(csv, o.result.records);
  write_summary(summary, o.summary);
  write_file(out_dir / "metrics.csv", csv.str());
  write_file(out_dir / "summary.ini", summary.str());
  return o;
}

}  // namespace

int command_run(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const RunOutput o = run_once(cfg, false, out_dir);
  std::cout << "aggregations " << o.summary.aggregations << " (stop: " << to_string(o.summary.stop)
            << "), results in " << out_dir.string() << '\n';
  return 0;
}

int command_profile(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const RunOutput o = run_once(cfg, true, out_dir);
  const ParameterEstimates& e = *o.summary.estimates;
  std::ostringstream est;
  write_estimates(est, e);
  write_file(out_dir / "estimates.ini", est.str());
  if (auto params = bound_inputs_from(e, o.summary, cfg)) {
    std::ostringstream bp;
    write_bound_params(bp, *params);
    write_file(out_dir / "bound_params.ini", bp.str());
    std::cout << "estimates feasible; bound parameters in " << (out_dir / "bound_params.ini").string()
              << '\n';
  } else {
    std::cout << "estimates infeasible or undefined; see " << (out_dir / "estimates.ini").string()
              << '\n';
  }
  return 0;
}

int command_bound(const fs::path& params, std::ostream& out) {
  const BoundInputs<double> in = load_bound_params(params);
  try {
    const BoundReport r = evaluate_bounds(in);
    out << "beta_max_admissible = " << format_double(r.beta_max_admissible) << '\n';
    out << "bound_constant_beta = " << format_double(r.constant) << '\n';
    out << "bound_clipped_beta = " << format_double(r.clipped) << '\n';
    out << "bound_scaled = " << format_double(r.scaled->bound) << '\n';
    out << "beta_max_admissible_scaled = " << format_double(r.scaled->beta_max_admissible) << '\n';
  } catch (const AdmissibilityError& e) {
    out << "refused: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    if (auto dash = part.find('-'); dash != std::string::npos && dash > 0) {
      const auto lo = to_int("--seeds", part.substr(0, dash));
      const auto hi = to_int("--seeds", part.substr(dash + 1));
      if (lo < 0 || hi < lo) throw ConfigError("--seeds: bad range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
      const auto s = to_int("--seeds", part);
      if (s < 0) throw ConfigError("--seeds: negative seed");
      seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty seed list");
  return seeds;
}

std::pair<std::string, std::vector<std::string>> parse_grid_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--grid: expected key=v1,v2 (got '" + text + "')");
  // Values are separated by ';' when a value itself is a list.
  const char sep = text.find(';') != std::string::npos ? ';' : ',';
  auto values = split(text.substr(eq + 1), sep);
  if (values.empty()) throw ConfigError("--grid: no values for '" + text.substr(0, eq) + "'");
  return {trim(text.substr(0, eq)), values};
}

int command_sweep(const ExperimentConfig& base, const fs::path& out_dir,
                  const std::vector<std::uint64_t>& seeds,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& grid) {
  std::vector<std::size_t> idx(grid.size(), 0);
  int failures = 0;
  std::size_t cells = 0;
  for (;;) {
    ExperimentConfig cfg = base;
    std::string name;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      apply_setting(cfg, grid[a].first, grid[a].second[idx[a]]);
      if (!name.empty()) name += '_';
      name += grid[a].first + '=' + grid[a].second[idx[a]];
    }
    std::replace_if(name.begin(), name.end(), [](char c) { return c == '/' || c == ' '; }, '-');
    if (name.empty()) name = "base";
    cfg.validate();
    for (std::uint64_t seed : seeds) {
      cfg.seed = seed;
      const fs::path dir = out_dir / name / ("seed_" + std::to_string(seed));
      try {
        run_once(cfg, false, dir);
      } catch (const std::exception& e) {
        std::cerr << "cell " << name << " seed " << seed << " aborted: " << e.what() << '\n';
        ++failures;
      }
      ++cells;
    }
    std::size_t a = 0;
    for (; a < grid.size(); ++a) {
      if (++idx[a] < grid[a].second.size()) break;
      idx[a] = 0;
    }
    if (a == grid.size()) break;
  }
  std::cout << cells << " runs, " << failures << " aborted, results under " << out_dir.string() << '\n';
  return failures ? 1 : 0;
}

}  // namespace afafed
