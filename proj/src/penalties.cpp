#include "aplm/penalties.hpp"

#include <algorithm>
#include <cmath>

namespace aplm {

double scad_derivative(double beta_abs, double lambda, double a) {
  if (lambda <= 0.0) return 0.0;
  if (beta_abs <= lambda) return lambda;
  return lambda * (std::max(a * lambda - beta_abs, 0.0) / ((a - 1.0) * lambda));
}

double scad_penalty(double beta_abs, double lambda, double a) {
  if (lambda <= 0.0) return 0.0;
  if (beta_abs <= lambda) return lambda * beta_abs;
  if (beta_abs <= a * lambda)
    return -(beta_abs * beta_abs - 2.0 * a * lambda * beta_abs + lambda * lambda) /
           (2.0 * (a - 1.0));
  return (a + 1.0) * lambda * lambda / 2.0;
}

double hard_penalty(double beta_abs, double lambda) {
  if (beta_abs >= lambda) return lambda * lambda;
  return lambda * lambda - (beta_abs - lambda) * (beta_abs - lambda);
}

double hard_derivative(double beta_abs, double lambda) {
  return 2.0 * std::max(lambda - beta_abs, 0.0);
}

double penalty_value(const PenaltySpec& spec, int k, double beta_abs) {
  const double lambda = spec.effective_lambda(k);
  return spec.kind == PenaltyKind::SCAD ? scad_penalty(beta_abs, lambda, spec.a)
                                        : hard_penalty(beta_abs, lambda);
}

double penalty_derivative(const PenaltySpec& spec, int k, double beta_abs) {
  const double lambda = spec.effective_lambda(k);
  return spec.kind == PenaltyKind::SCAD ? scad_derivative(beta_abs, lambda, spec.a)
                                        : hard_derivative(beta_abs, lambda);
}

Eigen::VectorXd lqa_matrix(const Eigen::VectorXd& beta, const PenaltySpec& spec) {
  if (spec.lambdas.size() != beta.size())
    throw DataError("penalty lambda vector does not match coefficient count");
  if (!(spec.a > 2.0)) throw DataError("SCAD shape parameter must exceed 2");
  if (!(spec.epsilon > 0.0)) throw DataError("LQA ridge epsilon must be positive");
  Eigen::VectorXd diag(beta.size());
  for (int k = 0; k < beta.size(); ++k) {
    const double b = std::abs(beta(k));
    diag(k) = penalty_derivative(spec, k, b) / (spec.epsilon + b);
  }
  return diag;
}

const char* penalty_kind_name(PenaltyKind kind) {
  return kind == PenaltyKind::SCAD ? "scad" : "hard";
}

PenaltyKind penalty_kind_from_name(const std::string& name) {
  if (name == "scad") return PenaltyKind::SCAD;
  if (name == "hard") return PenaltyKind::HARD;
  throw UsageError("unknown penalty '" + name + "' (expected scad|hard)");
}

}  // namespace aplm
