#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "aplm/estimator.hpp"
#include "aplm/penalties.hpp"

namespace aplm {

struct SolveOptions {
  double tol = 1e-8;             // sup-norm change between iterates
  int max_iter = 100;
  double zero_tol_scale = 1e-4;  // zero threshold = scale * max(1, |beta_init|_inf)
  bool record_objective = false;
};

struct PenalizedFit {
  Eigen::VectorXd beta;          // exact zeros off the active set
  std::vector<int> active_set;
  Eigen::VectorXd se;            // zero for inactive coefficients
  Eigen::VectorXd gamma;         // spline coefficients re-profiled at the final beta
  double lambda_scalar = 0.0;
  Eigen::VectorXd lambda_vector;
  double bic = 0.0;
  double effective_params = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // Q_P at successive iterates when recorded
};

struct TuningRecord {
  double lambda = 0.0;
  int active_size = 0;
  double bic = 0.0;
  double e_lambda = 0.0;
  bool converged = false;
};

struct TuningPath {
  std::vector<double> grid;
  std::vector<TuningRecord> records;
};

struct LambdaGrid {
  double min = 1e-3;
  double max = 5.0;
  int size = 40;

  // Logarithmically spaced values, ascending.
  std::vector<double> values() const;
};

// One full-system local quadratic approximation update from the current
// iterate (no zero freezing):
//   beta' = [S + n_T Sigma_lambda(beta)]^{-1} r
// with S the Schur complement and r the reduced right side of the system.
Eigen::VectorXd lqa_step(const Eigen::VectorXd& beta, const ProfiledSystem& sys,
                         const PenaltySpec& penalty);

// Exact penalized objective Q_P(beta) = Q(beta) + n_T sum_k p_{lambda_k}(|beta_k|)
// with gamma profiled out of Q.
double penalized_objective(const Eigen::VectorXd& beta, const ProfiledSystem& sys,
                           const PenaltySpec& penalty);

// Iterated LQA from the unpenalized estimate. Coefficients that fall below
// the zero threshold are frozen at exactly zero and dropped from subsequent
// systems, provided zeroing does not increase the exact penalized objective;
// otherwise they keep shrinking and freeze on a later iteration.
PenalizedFit solve_penalized(const ProfiledSystem& sys, PenaltySpec penalty,
                             const Eigen::VectorXd& beta_init, const SolveOptions& opts = {});
PenalizedFit solve_penalized(const ClusteredDataset& data, const std::vector<SplineSpace>& spaces,
                             const WorkingCovarianceSpec& cov, const PenaltySpec& penalty,
                             const Eigen::VectorXd& lambda_vector, const SolveOptions& opts = {});

// Sandwich standard errors of the active coefficients:
//   cov = (Qdd + n_T Sigma_lambda)^{-1} cov(Qd) (Qdd + n_T Sigma_lambda)^{-1}
// restricted to the active set; inactive coefficients report zero.
Eigen::VectorXd penalized_se(const PenalizedFit& fit, const ProfiledSystem& sys,
                             const PenaltySpec& penalty);

// Effective number of parameters tr{(Qdd + n_T Sigma_lambda)^{-1} Qdd} on the
// final active system.
double effective_parameters(const PenalizedFit& fit, const ProfiledSystem& sys,
                            const PenaltySpec& penalty);

// BIC(lambda) = log{n_T^{-1} sum_i e_i^T R_i^{-1} e_i} + log(n_T)/n_T e(lambda).
// An exactly reproduced response returns a large negative sentinel.
double bic_score(const PenalizedFit& fit, const ProfiledSystem& sys);

inline constexpr double kPerfectFitBic = -1e12;

// Grid search over scalar lambda with lambda_k = lambda * SE(beta_k) from the
// unpenalized fit (zero for an exempt intercept). Returns the minimum-BIC fit,
// ties broken toward larger lambda. `se_scale` overrides the per-coefficient
// scale vector when provided.
std::pair<PenalizedFit, TuningPath> select_lambda(
    const ProfiledSystem& sys, const FitResult& unpenalized, PenaltySpec penalty,
    const std::vector<double>& grid, const SolveOptions& opts = {},
    const Eigen::VectorXd* se_scale = nullptr);

}  // namespace aplm
