#include "afafed/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace afafed {

ProfilingLog::ProfilingLog(Eigen::Index dim)
    : g_hat_sum_(ModelVector::Zero(dim)), local_grad_sum_(ModelVector::Zero(dim)) {}

void ProfilingLog::record_aggregation(const ModelVector& g_hat, const ModelVector& local_grad) {
  if (g_hat.size() != dim() || local_grad.size() != dim())
    throw DomainError("record_aggregation: dimension mismatch");
  g_hat_sum_ += g_hat;
  const double n2 = g_hat.squaredNorm();
  g_hat_norm_sum_ += std::sqrt(n2);
  g_hat_sqnorm_sum_ += n2;
  local_grad_sum_ += local_grad;
  ++samples_;
  if (!g_hat_sum_.allFinite() || !local_grad_sum_.allFinite() || !std::isfinite(g_hat_sqnorm_sum_))
    throw DomainError("record_aggregation: non-finite running sums");
}

void ProfilingLog::merge(const ProfilingLog& other) {
  if (other.dim() != dim()) throw DomainError("ProfilingLog::merge: dimension mismatch");
  g_hat_sum_ += other.g_hat_sum_;
  g_hat_norm_sum_ += other.g_hat_norm_sum_;
  g_hat_sqnorm_sum_ += other.g_hat_sqnorm_sum_;
  local_grad_sum_ += other.local_grad_sum_;
  samples_ += other.samples_;
  profiles_.insert(profiles_.end(), other.profiles_.begin(), other.profiles_.end());
}

ParameterEstimates finalize(const ProfilingLog& log, const FairnessWeights& lambdas_final) {
  ParameterEstimates e;
  if (log.samples() == 0) return e;
  const auto n = static_cast<double>(log.samples());
  e.g_bar = log.g_hat_sum() / n;
  e.grad_hat = log.local_grad_sum() / n;
  e.g_norm_mean = log.g_hat_norm_sum() / n;
  e.g_sqnorm_mean = log.g_hat_sqnorm_sum() / n;

  const double grad_sq = e.grad_hat.squaredNorm();
  e.c_defined = grad_sq > 0.0;
  e.inner = e.g_bar.dot(e.grad_hat);
  e.inner_positive = e.c_defined && e.inner > 0.0;
  if (e.inner_positive) {
    e.k0 = e.g_bar.norm() * std::sqrt(grad_sq) / e.inner - 1.0;
    // Cauchy-Schwarz makes k0 >= 0; absorb rounding just below zero.
    if (e.k0 < 0.0 && e.k0 > -1e-12) e.k0 = 0.0;
    e.k0_nonnegative = e.k0 >= 0.0;
  }
  const double surplus = e.g_sqnorm_mean - e.g_norm_mean * e.g_norm_mean - grad_sq;
  e.variance_surplus = surplus >= 0.0;

  // profiling-phase records, averaged per coworker over merged runs
  std::map<int, std::pair<double, double>> f_sums;
  std::map<int, int> f_counts;
  double zeta = 0.0;
  for (const auto& p : log.profiles()) {
    f_sums[p.coworker].first += p.F0;
    f_sums[p.coworker].second += p.FT;
    f_counts[p.coworker] += 1;
    if (p.zeta) {
      e.zeta_defined = true;
      zeta = std::max(zeta, *p.zeta);
    }
  }
  if (!f_sums.empty()) {
    double f0 = 0.0, ft = 0.0;
    for (const auto& [k, sums] : f_sums) {
      if (k < 0 || k >= lambdas_final.size()) throw DomainError("finalize: profile for unknown coworker");
      const double c = f_counts[k];
      f0 += lambdas_final[k] * sums.first / c;
      ft += lambdas_final[k] * sums.second / c;
    }
    e.F0_hat = f0;
    e.F_star_hat = ft;
  }
  if (e.zeta_defined) e.zeta_hat = zeta;

  if (e.feasible()) {
    e.C_hat = e.inner / grad_sq;
    e.Gamma_hat = (1.0 + e.k0) * *e.C_hat;
    e.A_hat = surplus;
  }
  return e;
}

}  // namespace afafed
