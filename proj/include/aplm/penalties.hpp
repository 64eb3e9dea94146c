#pragma once

#include <Eigen/Dense>
#include <string>

#include "aplm/errors.hpp"

namespace aplm {

enum class PenaltyKind { SCAD, HARD };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::SCAD;
  double a = 3.7;            // SCAD shape, must exceed 2
  Eigen::VectorXd lambdas;   // per-coefficient regularization, lambda_k >= 0
  double epsilon = 1e-6;     // local quadratic approximation ridge
  bool penalize_intercept = false;
  int intercept_index = -1;  // -1 when the design carries no intercept column

  // lambda_k with the intercept exemption applied.
  double effective_lambda(int k) const {
    if (!penalize_intercept && k == intercept_index) return 0.0;
    return lambdas(k);
  }
};

// SCAD derivative: lambda {I(b <= lambda) + (a lambda - b)_+ / ((a-1) lambda) I(b > lambda)}.
double scad_derivative(double beta_abs, double lambda, double a);

// SCAD penalty, the antiderivative with p(0) = 0:
//   lambda b                                   on [0, lambda]
//   -(b^2 - 2 a lambda b + lambda^2)/(2(a-1))  on (lambda, a lambda]
//   (a+1) lambda^2 / 2                         beyond
double scad_penalty(double beta_abs, double lambda, double a);

// Hard thresholding penalty lambda^2 - (b - lambda)^2 I(b < lambda).
double hard_penalty(double beta_abs, double lambda);

// Its derivative 2 (lambda - b)_+.
double hard_derivative(double beta_abs, double lambda);

double penalty_value(const PenaltySpec& spec, int k, double beta_abs);
double penalty_derivative(const PenaltySpec& spec, int k, double beta_abs);

// Diagonal of the local quadratic approximation matrix
//   Sigma_lambda(beta)_kk = p'_{lambda_k}(|beta_k|) / (epsilon + |beta_k|),
// with the intercept entry forced to zero unless penalize_intercept is set.
Eigen::VectorXd lqa_matrix(const Eigen::VectorXd& beta, const PenaltySpec& spec);

const char* penalty_kind_name(PenaltyKind kind);
PenaltyKind penalty_kind_from_name(const std::string& name);

}  // namespace aplm
