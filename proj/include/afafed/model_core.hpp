#pragma once

#include "afafed/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>

namespace afafed {

enum class LossKind {
  kQuadratic,  // 1/2 (y - w'x)^2
  kLogistic,   // binary cross-entropy on sigmoid(w'x), y in {0, 1}
};

struct LossModel {
  LossKind kind = LossKind::kQuadratic;
  Eigen::Index dim = 1;
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

namespace detail {

template <typename Scalar>
const Example<Scalar>& deref(const Example<Scalar>& e) { return e; }
template <typename Scalar>
const Example<Scalar>& deref(const Example<Scalar>* e) { return *e; }

template <typename Scalar>
void check_example(const LossModel& model, const Vector<Scalar>& w,
                   const Example<Scalar>& e) {
  if (w.size() != model.dim || e.x.size() != model.dim)
    throw DomainError("dimension mismatch between model and data");
  if (e.y.size() != 1)
    throw DomainError("loss models expect a scalar label");
}

template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::abs, std::exp, std::log1p, std::max;
  return max(z, Scalar(0)) + log1p(exp(-abs(z)));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= 0) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar ez = exp(z);
  return ez / (Scalar(1) + ez);
}

template <typename Range>
auto range_size(const Range& data) {
  return static_cast<std::size_t>(std::distance(std::begin(data), std::end(data)));
}

}  // namespace detail

/// Per-example loss l(y, T(x, w), w).
template <typename Scalar>
Scalar example_loss(const LossModel& model, const Vector<Scalar>& w,
                    const Example<Scalar>& e) {
  detail::check_example(model, w, e);
  const Scalar z = w.dot(e.x);
  const Scalar y = e.y(0);
  switch (model.kind) {
    case LossKind::kQuadratic: {
      const Scalar r = y - z;
      return Scalar(0.5) * r * r;
    }
    case LossKind::kLogistic:
      return detail::softplus(z) - y * z;
  }
  throw DomainError("unknown loss kind");
}

/// out += d l / d w for one example.
template <typename Scalar>
void accumulate_example_gradient(const LossModel& model, const Vector<Scalar>& w,
                                 const Example<Scalar>& e, Vector<Scalar>& out) {
  detail::check_example(model, w, e);
  const Scalar z = w.dot(e.x);
  const Scalar y = e.y(0);
  switch (model.kind) {
    case LossKind::kQuadratic:
      out.noalias() -= (y - z) * e.x;
      return;
    case LossKind::kLogistic:
      out.noalias() += (detail::sigmoid(z) - y) * e.x;
      return;
  }
  throw DomainError("unknown loss kind");
}

/// Empirical risk F_k(w) over `data`. Accepts ranges of examples or of
/// pointers to examples (mini-batches are drawn as pointers into a buffer).
template <typename Scalar, typename Range>
Scalar local_risk(const LossModel& model, const Vector<Scalar>& w, const Range& data) {
  const auto n = detail::range_size(data);
  if (n == 0) throw DomainError("local_risk: empty data");
  Scalar sum(0);
  for (const auto& item : data) sum += example_loss(model, w, detail::deref(item));
  const Scalar risk = sum / static_cast<Scalar>(n);
  if (!std::isfinite(risk)) throw DomainError("local_risk: non-finite risk");
  return risk;
}

template <typename Scalar, typename Range>
Vector<Scalar> local_gradient(const LossModel& model, const Vector<Scalar>& w,
                              const Range& data) {
  const auto n = detail::range_size(data);
  if (n == 0) throw DomainError("local_gradient: empty data");
  Vector<Scalar> g = Vector<Scalar>::Zero(w.size());
  for (const auto& item : data) accumulate_example_gradient(model, w, detail::deref(item), g);
  g /= static_cast<Scalar>(n);
  if (!g.allFinite()) throw DomainError("local_gradient: non-finite gradient");
  return g;
}

/// Stochastic gradient on a mini-batch; the same average as local_gradient,
/// restricted to the batch.
template <typename Scalar, typename Range>
Vector<Scalar> minibatch_gradient(const LossModel& model, const Vector<Scalar>& w,
                                  const Range& batch) {
  return local_gradient(model, w, batch);
}

/// Unit-sum, non-negative fairness coefficients.
class FairnessWeights {
 public:
  FairnessWeights() = default;
  explicit FairnessWeights(ModelVector raw);

  static FairnessWeights uniform(Eigen::Index k);

  Eigen::Index size() const { return lambda_.size(); }
  double operator[](Eigen::Index k) const { return lambda_(k); }
  const ModelVector& values() const { return lambda_; }

  /// lambda_k *= factor, then renormalize the whole set to unit sum.
  void scale_and_normalize(Eigen::Index k, double factor);

 private:
  void normalize();

  ModelVector lambda_;
};

/// F(w) = sum_k lambda_k F_k(w).
template <typename Scalar>
Scalar global_risk(const LossModel& model, const Vector<Scalar>& w,
                   std::span<const Dataset<Scalar>> shards,
                   const FairnessWeights& weights) {
  if (static_cast<Eigen::Index>(shards.size()) != weights.size())
    throw DomainError("global_risk: shard/weight count mismatch");
  Scalar sum(0);
  for (std::size_t k = 0; k < shards.size(); ++k)
    sum += static_cast<Scalar>(weights[static_cast<Eigen::Index>(k)]) *
           local_risk(model, w, shards[k]);
  return sum;
}

template <typename Scalar>
Vector<Scalar> global_gradient(const LossModel& model, const Vector<Scalar>& w,
                               std::span<const Dataset<Scalar>> shards,
                               const FairnessWeights& weights) {
  if (static_cast<Eigen::Index>(shards.size()) != weights.size())
    throw DomainError("global_gradient: shard/weight count mismatch");
  Vector<Scalar> g = Vector<Scalar>::Zero(w.size());
  for (std::size_t k = 0; k < shards.size(); ++k)
    g += static_cast<Scalar>(weights[static_cast<Eigen::Index>(k)]) *
         local_gradient(model, w, shards[k]);
  return g;
}

/// Jain's index (sum w)^2 / (K sum w^2) of any non-negative weight vector.
template <typename Derived>
typename Derived::Scalar jain_fairness_index(const Eigen::MatrixBase<Derived>& weights) {
  using Scalar = typename Derived::Scalar;
  if (weights.size() == 0) throw DomainError("jain_fairness_index: empty weights");
  if ((weights.array() < Scalar(0)).any())
    throw DomainError("jain_fairness_index: negative weight");
  const Scalar sq = weights.squaredNorm();
  if (sq == Scalar(0)) throw DomainError("jain_fairness_index: all-zero weights");
  const Scalar s = weights.sum();
  return s * s / (static_cast<Scalar>(weights.size()) * sq);
}

inline double jain_fairness_index(const FairnessWeights& weights) {
  return jain_fairness_index(weights.values());
}

/// (1/n) X'X of a data set.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> second_moment(
    const Dataset<Scalar>& data, Eigen::Index dim) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim, dim);
  for (const auto& e : data) m.noalias() += e.x * e.x.transpose();
  if (!data.empty()) m /= static_cast<Scalar>(data.size());
  return m;
}

/// Smoothness constant of F_k: the largest Hessian eigenvalue bound.
/// Exact for the quadratic loss; the 1/4 curvature bound for the logistic one.
template <typename Scalar>
Scalar smoothness_constant(const LossModel& model, const Dataset<Scalar>& data) {
  if (data.empty()) throw DomainError("smoothness_constant: empty data");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(
      second_moment(data, model.dim), Eigen::EigenvaluesOnly);
  const Scalar top = es.eigenvalues().maxCoeff();
  return model.kind == LossKind::kQuadratic ? top : top / Scalar(4);
}

/// Global smoothness: max over shards, valid for every fairness weighting.
template <typename Scalar>
Scalar global_smoothness_constant(const LossModel& model,
                                  std::span<const Dataset<Scalar>> shards) {
  Scalar zeta(0);
  for (const auto& s : shards) zeta = std::max(zeta, smoothness_constant(model, s));
  return zeta;
}

/// Minimizer of the weighted quadratic global risk (normal equations).
template <typename Scalar>
Vector<Scalar> quadratic_minimizer(const LossModel& model,
                                   std::span<const Dataset<Scalar>> shards,
                                   const FairnessWeights& weights) {
  if (model.kind != LossKind::kQuadratic)
    throw DomainError("quadratic_minimizer: quadratic loss only");
  if (static_cast<Eigen::Index>(shards.size()) != weights.size())
    throw DomainError("quadratic_minimizer: shard/weight count mismatch");
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix h = Matrix::Zero(model.dim, model.dim);
  Vector<Scalar> rhs = Vector<Scalar>::Zero(model.dim);
  for (std::size_t k = 0; k < shards.size(); ++k) {
    const Scalar scale = static_cast<Scalar>(weights[static_cast<Eigen::Index>(k)]) /
                         static_cast<Scalar>(shards[k].size());
    for (const auto& e : shards[k]) {
      h.noalias() += scale * e.x * e.x.transpose();
      rhs.noalias() += scale * e.y(0) * e.x;
    }
  }
  Eigen::LDLT<Matrix> ldlt(h);
  if (ldlt.info() != Eigen::Success) throw DomainError("quadratic_minimizer: singular Gram matrix");
  return ldlt.solve(rhs);
}

}  // namespace afafed
