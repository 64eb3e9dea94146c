#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aplm/data_model.hpp"
#include "aplm/spline_basis.hpp"

namespace aplm {

// V^{-1}-weighted normal-equation blocks of the joint (beta, gamma) system:
//   [ h_xx  h_xb ] [beta ]   [ b_x ]
//   [ h_bx  h_bb ] [gamma] = [ b_b ]
// with h_bx = h_xb^T.
struct BlockSystem {
  Eigen::MatrixXd h_xx;  // d1 x d1
  Eigen::MatrixXd h_xb;  // d1 x dim
  Eigen::MatrixXd h_bb;  // dim x dim
  Eigen::VectorXd b_x;   // d1
  Eigen::VectorXd b_b;   // dim
};

BlockSystem assemble_blocks(const ClusteredDataset& data,
                            const std::vector<SplineSpace>& spaces,
                            const WorkingCovarianceSpec& cov);

// Solves the spline estimating equation at fixed beta:
//   gamma(beta) = h_bb^+ (b_b - h_bx beta).
// The pseudo-inverse handles the structural rank deficiency of stacked
// partition-of-unity blocks (shared constants across coordinates); within
// that null space the minimum-norm representative is returned.
Eigen::VectorXd profile_gamma(const Eigen::VectorXd& beta, const BlockSystem& blocks);

// Centered estimate of one additive component: the fitted spline minus its
// empirical mean over the observed covariate values.
struct CenteredCurve {
  SplineSpace space;
  Eigen::VectorXd coef;  // J_n spline coefficients for this coordinate
  double center = 0.0;   // empirical mean of the uncentered fitted spline

  double operator()(double z) const { return eval_basis(space, z).dot(coef) - center; }
};

Eigen::VectorXd centered_eta(const CenteredCurve& curve, const Eigen::VectorXd& grid);

struct FitDiagnostics {
  double schur_condition = 0.0;
  double hbb_min_eigen = 0.0;  // of n^{-1} h_bb, above the structural null space
  double hbb_max_eigen = 0.0;
  int hbb_rank = 0;
  int structural_nullity = 0;
  std::vector<std::string> warnings;
};

struct FitResult {
  Eigen::VectorXd beta;                     // d1
  Eigen::VectorXd gamma;                    // stacked spline coefficients
  std::vector<CenteredCurve> eta;           // one per nonparametric coordinate
  Eigen::MatrixXd omega;                    // sandwich covariance of sqrt(n) beta
  Eigen::VectorXd se;                       // sqrt(omega_kk / n)
  std::vector<Eigen::VectorXd> residuals;   // per cluster
  double intercept_shift = 0.0;             // constant absorbed by curve centering
  FitDiagnostics diagnostics;
};

// Precomputed profiled system shared by the unpenalized fit, the penalized
// solver, and the tuning search. Immutable after construction.
class ProfiledSystem {
 public:
  ProfiledSystem(ClusteredDataset data, std::vector<SplineSpace> spaces,
                 WorkingCovarianceSpec cov);

  const ClusteredDataset& data() const { return data_; }
  const std::vector<SplineSpace>& spaces() const { return spaces_; }
  const WorkingCovarianceSpec& covariance() const { return cov_; }
  const BlockSystem& blocks() const { return blocks_; }
  const std::vector<Eigen::MatrixXd>& vinv() const { return vinv_; }
  const std::vector<Eigen::MatrixXd>& design() const { return design_; }

  int d1() const { return data_.d1; }
  int spline_dim() const { return spline_dim_; }
  int n_total() const { return data_.n_total; }

  // X with its V^{-1}-weighted projection onto the spline design removed,
  // per cluster.
  const std::vector<Eigen::MatrixXd>& xhat() const { return xhat_; }

  // Schur complement S = sum_i xhat_i^T V_i^{-1} xhat_i and the reduced right
  // side r = sum_i xhat_i^T V_i^{-1} (y_i - proj y_i); the profiled estimator
  // is beta = S^{-1} r.
  const Eigen::MatrixXd& schur() const { return schur_; }
  const Eigen::VectorXd& reduced_rhs() const { return reduced_rhs_; }

  Eigen::VectorXd solve_beta() const;
  Eigen::VectorXd profile_gamma(const Eigen::VectorXd& beta) const;

  std::vector<Eigen::VectorXd> residuals(const Eigen::VectorXd& beta,
                                         const Eigen::VectorXd& gamma) const;

  // Weighted residual sum sum_i e_i^T V_i^{-1} e_i at the profiled gamma(beta).
  double weighted_rss(const Eigen::VectorXd& beta) const;

  // Sandwich middle term sum_i xhat_i^T V_i^{-1} e_i e_i^T V_i^{-1} xhat_i,
  // optionally restricted to a column subset of xhat.
  Eigen::MatrixXd meat(const std::vector<Eigen::VectorXd>& resid) const;
  Eigen::MatrixXd meat(const std::vector<Eigen::VectorXd>& resid,
                       const std::vector<int>& cols) const;

  // sum_i e_i^T R_i^{-1} e_i with R_i the working correlation (BIC numerator).
  double correlation_rss(const std::vector<Eigen::VectorXd>& resid) const;

  const FitDiagnostics& base_diagnostics() const { return diag_; }

 private:
  Eigen::VectorXd hbb_pinv_apply(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd hbb_pinv_apply(const Eigen::MatrixXd& rhs) const;

  ClusteredDataset data_;
  std::vector<SplineSpace> spaces_;
  WorkingCovarianceSpec cov_;
  int spline_dim_ = 0;

  BlockSystem blocks_;
  std::vector<Eigen::MatrixXd> vinv_;
  std::vector<Eigen::MatrixXd> design_;
  std::vector<Eigen::MatrixXd> xhat_;
  std::vector<Eigen::VectorXd> rdiag_sqrt_;  // sqrt diag(V_i), for R_i^{-1} forms

  Eigen::MatrixXd hbb_evec_;
  Eigen::VectorXd hbb_eval_;
  int hbb_rank_ = 0;

  Eigen::MatrixXd proj_coef_;    // h_bb^+ h_bx, spline coefficients of each X column
  Eigen::VectorXd piy_coef_;     // h_bb^+ b_b, spline coefficients of proj y
  Eigen::MatrixXd schur_;
  Eigen::VectorXd reduced_rhs_;
  Eigen::LLT<Eigen::MatrixXd> schur_llt_;
  bool schur_pd_ = false;

  FitDiagnostics diag_;
};

// Joint profiled weighted least squares; returns centered curves and the
// sandwich covariance of beta.
FitResult fit_unpenalized(const ProfiledSystem& sys);
FitResult fit_unpenalized(const ClusteredDataset& data, const std::vector<SplineSpace>& spaces,
                          const WorkingCovarianceSpec& cov);

// Per-cluster projected covariates (copies of ProfiledSystem::xhat).
std::vector<Eigen::MatrixXd> project_out_splines(const ClusteredDataset& data,
                                                 const std::vector<SplineSpace>& spaces,
                                                 const WorkingCovarianceSpec& cov);

// Robust covariance of sqrt(n) beta:
//   omega = n S^{-1} (sum_i xhat_i^T V_i^{-1} e_i e_i^T V_i^{-1} xhat_i) S^{-1}.
Eigen::MatrixXd sandwich_covariance(const ProfiledSystem& sys,
                                    const std::vector<Eigen::VectorXd>& residuals);

}  // namespace aplm
