#include "afafed/model_core.hpp"

namespace afafed {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kQuadratic: return "quadratic";
    case LossKind::kLogistic: return "logistic";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "quadratic" || name == "quadratic-regression") return LossKind::kQuadratic;
  if (name == "logistic" || name == "logistic-binary") return LossKind::kLogistic;
  throw ConfigError("unknown loss model '" + name + "'");
}

FairnessWeights::FairnessWeights(ModelVector raw) : lambda_(std::move(raw)) {
  if (lambda_.size() == 0) throw DomainError("fairness weights: empty");
  if (!lambda_.allFinite() || (lambda_.array() < 0.0).any())
    throw DomainError("fairness weights: entries must be finite and non-negative");
  normalize();
}

FairnessWeights FairnessWeights::uniform(Eigen::Index k) {
  if (k <= 0) throw DomainError("fairness weights: K must be positive");
  return FairnessWeights(ModelVector::Constant(k, 1.0 / static_cast<double>(k)));
}

void FairnessWeights::scale_and_normalize(Eigen::Index k, double factor) {
  if (k < 0 || k >= lambda_.size()) throw DomainError("fairness weights: index out of range");
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw DomainError("fairness weights: scale factor must be positive");
  lambda_(k) *= factor;
  normalize();
}

void FairnessWeights::normalize() {
  const double s = lambda_.sum();
  if (!(s > 0.0)) throw DomainError("fairness weights: all-zero weights");
  lambda_ /= s;
}

}  // namespace afafed
