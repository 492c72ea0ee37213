#pragma once

#include "afafed/bounds.hpp"
#include "afafed/coworker.hpp"
#include "afafed/model_core.hpp"
#include "afafed/network.hpp"
#include "afafed/profiler.hpp"
#include "afafed/server.hpp"
#include "afafed/simulation.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace afafed {

enum class PartitionKind { kIid, kLabelSkew };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::kIid;
  int classes_per_coworker = 1;   // label-skew only
};

/// Everything a config file can set. Per-coworker quantities are lists of
/// length 1 (broadcast), #categories (one per category) or K.
struct ExperimentConfig {
  int K = 8;
  std::vector<int> categories{3, 3, 2};

  std::vector<double> p_loss{0.0};
  std::vector<double> rate{1e6, 5e5, 2e4};
  RateKind rate_kind = RateKind::kConstant;
  double rate_spread = 0.0;
  std::int64_t payload_bits = 0;    // 0: 64 (dim + 2)
  double downlink_delay = 0.0;
  double timer_factor = 3.0;

  std::vector<double> speed{5e8, 2.5e8, 1e7};
  std::vector<double> cycles_per_iteration{1e7};

  ArrivalKind arrival_kind = ArrivalKind::kPoisson;
  std::vector<double> arrival_rate{20.0};
  std::vector<double> arrival_interval{0.05};
  std::string trace;                // path, "{k}" replaced by the coworker index

  LossKind loss = LossKind::kQuadratic;
  int dim = 10;
  double noise = 0.1;
  int examples_per_coworker = 200;
  int classes = 10;
  double class_separation = 1.0;
  std::optional<std::uint64_t> data_seed;   // defaults to sim.seed

  PartitionSpec partition;
  AdaptiveConfig adaptive;
  MixingConfig mixing;
  double safety_margin = 4.0;
  std::size_t buffer_capacity = 32;
  std::size_t minibatch = 16;

  std::uint64_t seed = 1;
  std::int64_t T = 100;
  double horizon = 1e9;
  std::uint64_t event_budget = 100'000'000;
  int risk_eval_every = 1;
  double epsilon = 0.5;             // bound parameter written by `profile`

  void validate() const;
  std::uint64_t effective_data_seed() const { return data_seed ? *data_seed : seed; }
  /// Per-coworker value of a list-valued key.
  double per_coworker(const std::vector<double>& values, int k, const std::string& key) const;
  int category_of(int k) const;
};

/// Named presets: "table_a1_small" (K = 8, 3/3/2 categories) and "table_a1"
/// (K = 100, 30/40/30).
ExperimentConfig preset(const std::string& name);

/// Applies one dotted key (e.g. "link.p_loss") to the config. Throws
/// ConfigError naming the key on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Reads an INI file. A top-level `preset` key selects the starting point.
ExperimentConfig load_config(const std::filesystem::path& path);

/// One shard per coworker, deterministic in the data seed.
std::vector<Dataset<double>> generate_data(const ExperimentConfig& cfg);

/// Shards, compute/link/arrival models and the engine config.
struct SimulationInputs {
  SimulationConfig sim;
  std::vector<CoworkerSetup> setups;
};
SimulationInputs build_inputs(const ExperimentConfig& cfg, bool profiling);

struct RunSummary {
  std::optional<double> final_risk;
  std::optional<double> mean_grad_sqnorm;
  std::int64_t aggregations = 0;
  std::uint64_t attempts = 0;
  std::uint64_t drops = 0;
  std::uint64_t events = 0;
  double end_time = 0.0;
  StopReason stop = StopReason::kQueueEmpty;
  std::vector<double> access_probability;   // empirical P_k
  double I_bar = 0.0;
  double I2_bar = 0.0;
  std::uint64_t iterations = 0;
  std::uint64_t stalls_pre_warmup = 0;
  std::uint64_t stalls_post_warmup = 0;
  std::uint64_t timer_expiries = 0;
  std::optional<ParameterEstimates> estimates;
};

RunSummary summarize(const SimulationResult& result, const FairnessWeights& lambdas);

constexpr const char* kMetricsHeader =
    "t,virtual_time,sender,age,beta,lambda_checksum,fairness_index,global_risk,grad_sqnorm";

void write_metrics_csv(std::ostream& out, const std::vector<AggregationRecord>& records);
void write_summary(std::ostream& out, const RunSummary& s);
void write_estimates(std::ostream& out, const ParameterEstimates& e);

/// Bound inputs from profiled estimates; std::nullopt unless every estimate
/// the bound needs is defined.
std::optional<BoundInputs<double>> bound_inputs_from(const ParameterEstimates& e,
                                                     const RunSummary& s,
                                                     const ExperimentConfig& cfg);
void write_bound_params(std::ostream& out, const BoundInputs<double>& in);
BoundInputs<double> load_bound_params(const std::filesystem::path& path);

struct BoundReport {
  double beta_max_admissible = 0.0;
  double constant = 0.0;
  double clipped = 0.0;
  std::optional<ScaledBound<double>> scaled;
};
/// Throws AdmissibilityError when beta_max exceeds the admissible value.
BoundReport evaluate_bounds(const BoundInputs<double>& in);

/// Subcommand bodies. Each returns the process exit code.
int command_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
int command_profile(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
int command_bound(const std::filesystem::path& params, std::ostream& out);
int command_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                  const std::vector<std::uint64_t>& seeds,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& grid);

/// "1-20" or "1,4,9".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
/// "key=v1,v2".
std::pair<std::string, std::vector<std::string>> parse_grid_axis(const std::string& text);

std::string format_double(double v);

}  // namespace afafed
