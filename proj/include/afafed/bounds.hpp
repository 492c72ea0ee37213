#pragma once

#include "afafed/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace afafed {

/// beta exceeds the admissible beta_MAX; the bound does not apply.
class AdmissibilityError : public DomainError {
 public:
  AdmissibilityError(double beta, double admissible)
      : DomainError("beta " + std::to_string(beta) + " exceeds the admissible value " +
                    std::to_string(admissible)),
        beta_(beta),
        admissible_(admissible) {}
  double beta() const { return beta_; }
  double admissible() const { return admissible_; }

 private:
  double beta_;
  double admissible_;
};

template <typename Scalar>
struct BoundInputs {
  Scalar C = 1;
  Scalar Gamma = 1;
  Scalar A = 0;
  Scalar zeta = 1;
  Scalar F0 = 0;
  Scalar F_star = 0;
  Scalar epsilon = Scalar(0.5);
  Scalar beta_min = Scalar(0.01);
  Scalar beta_max = Scalar(0.1);
  std::int64_t T = 1;
  Scalar sigma2_bar = 1;
  Scalar I_bar = 1;
  Scalar I2_bar = 1;
  Scalar p_loss_bar = 0;
  Scalar C0 = 1;
  Scalar Gamma0 = 1;
  Scalar A0 = 0;
};

namespace detail {

template <typename Scalar>
void check_common(const BoundInputs<Scalar>& in) {
  if (!(in.zeta > 0)) throw DomainError("bounds: zeta must be positive");
  if (!(in.epsilon > 0 && in.epsilon < 1)) throw DomainError("bounds: epsilon must lie in (0, 1)");
}

template <typename Scalar>
void check_constants(Scalar C, Scalar Gamma, Scalar A) {
  if (!(C > 0)) throw DomainError("bounds: C must be positive");
  if (!(Gamma >= C)) throw DomainError("bounds: Gamma must be >= C");
  if (!(A >= 0)) throw DomainError("bounds: A must be >= 0");
}

template <typename Scalar>
void check_run(const BoundInputs<Scalar>& in) {
  if (in.T < 1) throw DomainError("bounds: T must be >= 1");
  if (!(in.F0 >= in.F_star)) throw DomainError("bounds: F0 must be >= F*");
}

template <typename Scalar>
Scalar admissible(Scalar C, Scalar Gamma, Scalar zeta, Scalar epsilon) {
  return 2 * C * epsilon / (zeta * (1 + Gamma * Gamma));
}

template <typename Scalar>
Scalar clipped(const BoundInputs<Scalar>& in, Scalar C, Scalar A) {
  const Scalar denom = C * (1 - in.epsilon);
  return (in.F0 - in.F_star) / (denom * in.beta_min * static_cast<Scalar>(in.T)) +
         A * in.zeta * in.beta_max * in.beta_max / (2 * denom * in.beta_min);
}

}  // namespace detail

/// 2 C eps / (zeta (1 + Gamma^2)).
template <typename Scalar>
Scalar beta_max_admissible(const BoundInputs<Scalar>& in) {
  detail::check_common(in);
  return detail::admissible(in.C, in.Gamma, in.zeta, in.epsilon);
}

/// (F0 - F*) / (C (1-eps) beta T) + A zeta beta / (2 C (1-eps)).
template <typename Scalar>
Scalar bound_constant_beta(const BoundInputs<Scalar>& in, Scalar beta) {
  detail::check_common(in);
  detail::check_constants(in.C, in.Gamma, in.A);
  detail::check_run(in);
  if (!(beta > 0)) throw DomainError("bounds: beta must be positive");
  const Scalar adm = beta_max_admissible(in);
  if (beta > adm) throw AdmissibilityError(double(beta), double(adm));
  const Scalar denom = in.C * (1 - in.epsilon);
  return (in.F0 - in.F_star) / (denom * beta * static_cast<Scalar>(in.T)) +
         in.A * in.zeta * beta / (2 * denom);
}

template <typename Scalar>
Scalar bound_clipped_beta(const BoundInputs<Scalar>& in) {
  detail::check_common(in);
  detail::check_constants(in.C, in.Gamma, in.A);
  detail::check_run(in);
  if (!(in.beta_min > 0)) throw DomainError("bounds: beta_min must be positive");
  if (!(in.beta_max >= in.beta_min)) throw DomainError("bounds: beta_max must be >= beta_min");
  const Scalar adm = beta_max_admissible(in);
  if (in.beta_max > adm) throw AdmissibilityError(double(in.beta_max), double(adm));
  return detail::clipped(in, in.C, in.A);
}

template <typename Scalar>
struct ScaledBound {
  Scalar bound;
  Scalar beta_max_admissible;
  Scalar C, Gamma, A;   // the substituted constants
};

/// Clipped bound after C = C0 I, Gamma = Gamma0 I, A = A0 Sigma^2 I2.
template <typename Scalar>
ScaledBound<Scalar> bound_scaled(const BoundInputs<Scalar>& in) {
  detail::check_common(in);
  if (!(in.I_bar > 0)) throw DomainError("bounds: I_bar must be positive");
  if (!(in.sigma2_bar >= 0)) throw DomainError("bounds: sigma2_bar must be >= 0");
  if (in.I2_bar < in.I_bar * in.I_bar * (1 - Scalar(1e-12)))
    throw DomainError("bounds: I2_bar < I_bar^2 violates Jensen's inequality");
  BoundInputs<Scalar> s = in;
  s.C = in.C0 * in.I_bar;
  s.Gamma = in.Gamma0 * in.I_bar;
  s.A = in.A0 * in.sigma2_bar * in.I2_bar;
  ScaledBound<Scalar> out;
  out.C = s.C;
  out.Gamma = s.Gamma;
  out.A = s.A;
  out.beta_max_admissible = detail::admissible(s.C, s.Gamma, s.zeta, s.epsilon);
  out.bound = bound_clipped_beta(s);
  return out;
}

template <typename Scalar>
struct CoworkerMoments {
  Scalar P;
  Scalar sigma2;
  Scalar iter_mean;
  Scalar iter_sq_mean;
};

template <typename Scalar>
struct EnsembleAverages {
  Scalar sigma2_bar;
  Scalar I_bar;
  Scalar I2_bar;
};

template <typename Scalar>
EnsembleAverages<Scalar> ensemble_averages(const std::vector<CoworkerMoments<Scalar>>& per_coworker) {
  Scalar total(0);
  EnsembleAverages<Scalar> out{0, 0, 0};
  for (const auto& m : per_coworker) {
    if (!(m.P >= 0)) throw DomainError("ensemble_averages: negative probability");
    total += m.P;
    out.sigma2_bar += m.P * m.sigma2;
    out.I_bar += m.P * m.iter_mean;
    out.I2_bar += m.P * m.iter_sq_mean;
  }
  if (std::abs(total - Scalar(1)) > Scalar(1e-9))
    throw DomainError("ensemble_averages: probabilities must sum to 1");
  return out;
}

/// (1 - p) N.
template <typename Scalar>
Scalar effective_T(Scalar p_loss_bar, std::int64_t n_total) {
  if (!(p_loss_bar >= 0 && p_loss_bar <= 1)) throw DomainError("effective_T: p outside [0, 1]");
  if (n_total < 0) throw DomainError("effective_T: negative attempt count");
  return (1 - p_loss_bar) * static_cast<Scalar>(n_total);
}

template <typename Scalar>
Scalar variance_bound_sigma_k(Scalar sigma1_sq, std::int64_t mb_size, Scalar sigma2_sq) {
  if (mb_size < 1) throw DomainError("variance_bound_sigma_k: |MB| must be >= 1");
  return sigma1_sq / static_cast<Scalar>(mb_size) + sigma2_sq;
}

/// Right side of the beta(t)-weighted form, reported as a diagnostic next to
/// (1/T) sum beta(t) ||grad F(w̄(t))||^2:
/// (F0 - F*) / (C (1-eps) T) + A zeta / (2 C (1-eps)) (1/T) sum beta(t)^2.
template <typename Scalar>
Scalar weighted_bound_diagnostic(const BoundInputs<Scalar>& in, const std::vector<Scalar>& betas) {
  detail::check_common(in);
  detail::check_constants(in.C, in.Gamma, in.A);
  if (betas.empty()) throw DomainError("weighted_bound_diagnostic: empty beta sequence");
  Scalar s2(0);
  for (Scalar b : betas) s2 += b * b;
  const auto n = static_cast<Scalar>(betas.size());
  const Scalar denom = in.C * (1 - in.epsilon);
  return (in.F0 - in.F_star) / (denom * n) + in.A * in.zeta * (s2 / n) / (2 * denom);
}

}  // namespace afafed
