#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "aplm/data_model.hpp"
#include "aplm/penalized_solver.hpp"
#include "aplm/rng.hpp"

namespace aplm {

// True data-generating process of the simulation study:
//   y = beta0' x + eta1(z1) + eta2(z2) + e,  clusters of 3, exchangeable
//   errors with correlation error_alpha.
struct SimConfig {
  int n = 100;               // cluster count, >= 10
  int cluster_size = 3;
  int replicates = 100;
  std::uint64_t seed = 1;
  CovKind working = CovKind::EX;      // working covariance used for fitting
  PenaltyKind penalty = PenaltyKind::SCAD;
  double error_alpha = 0.9;           // exchangeable error correlation
  int degree = 3;
  int interior_knots = 4;
  double scad_a = 3.7;
  double epsilon = 1e-6;
  LambdaGrid grid;
  int threads = 1;
};

double sim_eta1(double z);  // sin 2 pi (z - 0.5)
double sim_eta2(double z);  // z - 0.5 + sin 2 pi (z - 0.5)
Eigen::VectorXd sim_beta0();
const std::vector<int>& sim_active_set();  // {0, 1, 4}

// Bivariate normal pair (common mean, sd, correlation) rejection-sampled into
// [0,1]^2. Throws NumericError when the acceptance rate drops below 1e-4.
std::pair<double, double> sample_z_pair(Rng& rng, double mean, double sd, double corr);

// One synthetic dataset: z pairs truncated to the unit square, x1..x6 and the
// x7 noise at sd 0.25, x8 a +-0.5 coin, exchangeable Gaussian errors.
ClusteredDataset generate_replicate(const SimConfig& config, Rng& rng);

// Model error (beta - beta0)' M (beta - beta0) with M the pooled empirical
// second-moment matrix of X.
double model_error(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta0,
                   const ClusteredDataset& data);

struct SdRow {
  double sd = 0.0;      // MAD of estimates / 0.6745
  double sd_m = 0.0;    // median of estimated standard errors
  double sd_mad = 0.0;  // MAD of estimated standard errors / 0.6745
};

// Robust spread summaries over replicates; needs at least two entries.
SdRow sd_metrics(const std::vector<double>& estimates, const std::vector<double>& ses);

struct MetricsRow {
  double c = 0.0;     // mean count of true zeros set to zero
  double i = 0.0;     // mean count of true nonzeros set to zero
  double mrme = 0.0;  // 100 x median relative model error vs the full fit
  double rmse = 0.0;  // sqrt(mean ||beta - beta0||^2)
};

struct SimMetrics {
  MetricsRow penalized;
  MetricsRow oracle;
  std::array<SdRow, 3> sd_penalized;  // beta1, beta2, beta5
  std::array<SdRow, 3> sd_oracle;
  std::array<double, 3> coverage{};   // 95% sandwich intervals, unpenalized fit
  std::array<double, 2> eta_l2{};     // mean integrated squared curve error
  double exact_support_rate = 0.0;    // replicates recovering exactly {1,2,5}
  double full_rmse = 0.0;
  int excluded = 0;                   // non-converged replicates dropped
  int replicates_used = 0;
};

// Full study: per replicate generate, fit unpenalized, BIC-select the
// penalized fit, refit the oracle, and aggregate all Table 1/2 metrics.
// Deterministic for a given seed regardless of thread count.
SimMetrics run_study(const SimConfig& config);

}  // namespace aplm
