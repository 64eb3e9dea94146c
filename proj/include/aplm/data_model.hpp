#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aplm/errors.hpp"

namespace aplm {

// One subject/cluster: response vector plus parametric (x) and
// nonparametric (z) covariate rows, optionally with observation times.
struct Cluster {
  Eigen::VectorXd y;                     // m_i
  Eigen::MatrixXd x;                     // m_i x d1
  Eigen::MatrixXd z;                     // m_i x d2
  std::optional<Eigen::VectorXd> times;  // m_i, needed for RSM covariances

  int size() const { return static_cast<int>(y.size()); }
};

struct ClusteredDataset {
  std::vector<Cluster> clusters;
  int d1 = 0;       // parametric covariates
  int d2 = 0;       // nonparametric covariates
  int n = 0;        // cluster count
  int n_total = 0;  // total observations, sum of m_i

  int max_cluster_size() const;
};

enum class CovKind { WI, EX, AR1, RSM };

struct RsmParams {
  double tau2 = 0.0;    // measurement error variance
  double nu2 = 0.0;     // random intercept variance
  double omega2 = 0.0;  // serial process variance
};

// Declarative description of the working covariance V_i. For EX/AR1 `alpha`
// is the correlation nuisance parameter; for RSM it is the exponential decay
// rate of the serial component. Marginal variances are taken as identity for
// WI/EX/AR1 (correlation-only working model).
struct WorkingCovarianceSpec {
  CovKind kind = CovKind::WI;
  double alpha = 0.0;
  RsmParams rsm;
};

struct CenteringRecord {
  Eigen::VectorXd x_means;  // column means removed from X
};

// One flat input row prior to grouping.
struct Record {
  std::string subject;
  double y = 0.0;
  std::vector<double> x;
  std::vector<double> z;
  std::optional<double> time;
};

// Groups flat rows into clusters by subject id, ordered by first appearance.
// Throws DataError on empty input, ragged rows, or inconsistent time columns.
ClusteredDataset assemble_dataset(const std::vector<Record>& records);

// Removes pooled column means from X; the record allows prediction-time
// reconstruction on the original covariate scale.
std::pair<ClusteredDataset, CenteringRecord> center_x(const ClusteredDataset& data);

// Affinely maps each Z column onto [0,1] using pooled min/max; returns the
// per-coordinate (a_l, b_l) pairs. Constant columns raise DataError.
std::pair<ClusteredDataset, std::vector<std::pair<double, double>>> rescale_z(
    const ClusteredDataset& data);

// Builds the m_i x m_i working covariance V_i for one cluster.
//   WI   identity
//   EX   1 on the diagonal, alpha off it; needs 1 + (m_i-1) alpha > 0, alpha < 1
//   AR1  alpha^|j-j'|; needs |alpha| < 1
//   RSM  tau2 I + nu2 J + omega2 H with H(j,j') = exp(-alpha |t_j - t_j'|)
Eigen::MatrixXd build_working_covariance(const WorkingCovarianceSpec& spec,
                                         const Cluster& cluster);

// Working correlation R_i = D^{-1/2} V_i D^{-1/2} (identical to V_i for the
// unit-diagonal structures).
Eigen::MatrixXd build_working_correlation(const WorkingCovarianceSpec& spec,
                                          const Cluster& cluster);

// Inverse via symmetric eigenfactorization; rejects matrices that are not
// positive definite or have condition number above 1e12.
Eigen::MatrixXd invert_covariance(const Eigen::MatrixXd& v);

// Moment estimator of the EX/AR1 correlation nuisance from residuals of a
// working-independence pre-fit: average within-cluster cross-product (all
// pairs for EX, lag-1 pairs for AR1) over the average squared residual.
double estimate_alpha_moment(CovKind kind, const std::vector<Eigen::VectorXd>& residuals);

// Keeps only the given X columns (used e.g. for oracle refits).
ClusteredDataset select_x_columns(const ClusteredDataset& data, const std::vector<int>& cols);

// CSV ingestion. Header: subject,y,x1..x{d1},z1..z{d2}[,time]; rows need not
// be sorted by subject.
std::vector<Record> load_csv(const std::string& path);
ClusteredDataset load_dataset_csv(const std::string& path);

const char* cov_kind_name(CovKind kind);
CovKind cov_kind_from_name(const std::string& name);

}  // namespace aplm
