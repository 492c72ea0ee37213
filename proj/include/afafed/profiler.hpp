#pragma once

#include "afafed/model_core.hpp"
#include "afafed/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace afafed {

/// Per-coworker output of the synchronized profiling phase.
struct CoworkerProfile {
  int coworker = 0;
  double F0 = 0.0;     // F_k(w̄(0))
  double FT = 0.0;     // F_k(w̄(T))
  std::optional<double> zeta;   // unset when w̄(T) == w̄(0)
};

/// Running sums over accepted aggregations plus the profiling-phase records.
/// Logs from several seeded runs merge into pooled sums.
class ProfilingLog {
 public:
  ProfilingLog() = default;
  explicit ProfilingLog(Eigen::Index dim);

  void record_aggregation(const ModelVector& g_hat, const ModelVector& local_grad);
  void add_coworker_profile(CoworkerProfile p) { profiles_.push_back(std::move(p)); }
  void merge(const ProfilingLog& other);

  Eigen::Index dim() const { return g_hat_sum_.size(); }
  std::int64_t samples() const { return samples_; }
  const ModelVector& g_hat_sum() const { return g_hat_sum_; }
  double g_hat_norm_sum() const { return g_hat_norm_sum_; }
  double g_hat_sqnorm_sum() const { return g_hat_sqnorm_sum_; }
  const ModelVector& local_grad_sum() const { return local_grad_sum_; }
  const std::vector<CoworkerProfile>& profiles() const { return profiles_; }

 private:
  ModelVector g_hat_sum_;
  double g_hat_norm_sum_ = 0.0;
  double g_hat_sqnorm_sum_ = 0.0;
  ModelVector local_grad_sum_;
  std::int64_t samples_ = 0;
  std::vector<CoworkerProfile> profiles_;
};

struct ParameterEstimates {
  // sample averages
  ModelVector g_bar;
  ModelVector grad_hat;
  double g_norm_mean = 0.0;
  double g_sqnorm_mean = 0.0;
  double inner = 0.0;      // <Ḡ, ∇F̂>
  double k0 = 0.0;

  bool inner_positive = false;
  bool k0_nonnegative = false;
  bool variance_surplus = false;
  bool c_defined = false;       // ||∇F̂|| > 0
  bool zeta_defined = false;    // w̄(T) != w̄(0) for at least one record

  // set only when feasible()
  std::optional<double> C_hat;
  std::optional<double> Gamma_hat;
  std::optional<double> A_hat;
  std::optional<double> zeta_hat;
  std::optional<double> F_star_hat;
  std::optional<double> F0_hat;

  bool feasible() const { return c_defined && inner_positive && k0_nonnegative && variance_surplus; }
};

/// Sample averages, feasibility gating and the estimators.
/// F̂*, F̂(0) are lambda-weighted (per-coworker values averaged over records
/// from merged runs); zeta is the max secant ratio.
ParameterEstimates finalize(const ProfilingLog& log, const FairnessWeights& lambdas_final);

/// Secant ratio ||∇F̃_k(w_end) - ∇F̃_k(w_start)|| / ||w̄(T) - w̄(0)|| with the
/// same mini-batch at both points.
template <typename Range>
std::optional<double> secant_ratio(const LossModel& model, const Range& batch,
                                   const ModelVector& w_start, const ModelVector& w_end,
                                   const ModelVector& global_start, const ModelVector& global_end) {
  const double den = (global_end - global_start).norm();
  if (!(den > 0.0)) return std::nullopt;
  const ModelVector d = local_gradient(model, w_end, batch) - local_gradient(model, w_start, batch);
  return d.norm() / den;
}

}  // namespace afafed
