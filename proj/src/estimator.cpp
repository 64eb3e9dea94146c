#include "aplm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace aplm {

namespace {

// Eigenvalues at or below this relative threshold count as null directions.
constexpr double kNullThreshold = 1e-11;

struct PsdPinv {
  Eigen::MatrixXd evec;
  Eigen::VectorXd eval;
  int rank = 0;
};

PsdPinv psd_pinv(const Eigen::MatrixXd& a) {
  PsdPinv p;
  if (a.rows() == 0) return p;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("eigenfactorization of spline block failed");
  p.evec = es.eigenvectors();
  p.eval = es.eigenvalues();
  const double cut = std::max(p.eval.maxCoeff(), 0.0) * kNullThreshold;
  for (int i = 0; i < p.eval.size(); ++i)
    if (p.eval(i) > cut) ++p.rank;
  return p;
}

}  // namespace

BlockSystem assemble_blocks(const ClusteredDataset& data,
                            const std::vector<SplineSpace>& spaces,
                            const WorkingCovarianceSpec& cov) {
  const int d1 = data.d1;
  const int dim = total_dimension(spaces);
  BlockSystem blocks;
  blocks.h_xx = Eigen::MatrixXd::Zero(d1, d1);
  blocks.h_xb = Eigen::MatrixXd::Zero(d1, dim);
  blocks.h_bb = Eigen::MatrixXd::Zero(dim, dim);
  blocks.b_x = Eigen::VectorXd::Zero(d1);
  blocks.b_b = Eigen::VectorXd::Zero(dim);
  for (const auto& c : data.clusters) {
    const Eigen::MatrixXd vinv = invert_covariance(build_working_covariance(cov, c));
    const Eigen::MatrixXd b = build_design(spaces, c);
    const Eigen::MatrixXd vx = vinv * c.x;
    blocks.h_xx.noalias() += c.x.transpose() * vx;
    blocks.b_x.noalias() += vx.transpose() * c.y;
    if (dim > 0) {
      const Eigen::MatrixXd vb = vinv * b;
      blocks.h_xb.noalias() += c.x.transpose() * vb;
      blocks.h_bb.noalias() += b.transpose() * vb;
      blocks.b_b.noalias() += vb.transpose() * c.y;
    }
  }
  return blocks;
}

Eigen::VectorXd profile_gamma(const Eigen::VectorXd& beta, const BlockSystem& blocks) {
  if (blocks.h_bb.rows() == 0) return Eigen::VectorXd();
  const PsdPinv p = psd_pinv(blocks.h_bb);
  const Eigen::VectorXd rhs = blocks.b_b - blocks.h_xb.transpose() * beta;
  const double cut = std::max(p.eval.maxCoeff(), 0.0) * kNullThreshold;
  Eigen::VectorXd coef = p.evec.transpose() * rhs;
  for (int i = 0; i < coef.size(); ++i) coef(i) = p.eval(i) > cut ? coef(i) / p.eval(i) : 0.0;
  return p.evec * coef;
}

Eigen::VectorXd centered_eta(const CenteredCurve& curve, const Eigen::VectorXd& grid) {
  Eigen::VectorXd vals(grid.size());
  for (int i = 0; i < grid.size(); ++i) vals(i) = curve(grid(i));
  return vals;
}

ProfiledSystem::ProfiledSystem(ClusteredDataset data, std::vector<SplineSpace> spaces,
                               WorkingCovarianceSpec cov)
    : data_(std::move(data)), spaces_(std::move(spaces)), cov_(cov) {
  if (static_cast<int>(spaces_.size()) != data_.d2)
    throw DataError("one spline space per nonparametric covariate is required");
  spline_dim_ = total_dimension(spaces_);
  if (data_.d1 + spline_dim_ >= data_.n_total)
    throw NumericError("more coefficients than observations; reduce knots or covariates");

  const int d1 = data_.d1;
  blocks_.h_xx = Eigen::MatrixXd::Zero(d1, d1);
  blocks_.h_xb = Eigen::MatrixXd::Zero(d1, spline_dim_);
  blocks_.h_bb = Eigen::MatrixXd::Zero(spline_dim_, spline_dim_);
  blocks_.b_x = Eigen::VectorXd::Zero(d1);
  blocks_.b_b = Eigen::VectorXd::Zero(spline_dim_);

  vinv_.reserve(data_.clusters.size());
  design_.reserve(data_.clusters.size());
  rdiag_sqrt_.reserve(data_.clusters.size());
  for (const auto& c : data_.clusters) {
    Eigen::MatrixXd v = build_working_covariance(cov_, c);
    rdiag_sqrt_.push_back(v.diagonal().array().sqrt());
    vinv_.push_back(invert_covariance(v));
    design_.push_back(build_design(spaces_, c));
    const Eigen::MatrixXd& vinv = vinv_.back();
    const Eigen::MatrixXd& b = design_.back();
    const Eigen::MatrixXd vx = vinv * c.x;
    blocks_.h_xx.noalias() += c.x.transpose() * vx;
    blocks_.b_x.noalias() += vx.transpose() * c.y;
    if (spline_dim_ > 0) {
      const Eigen::MatrixXd vb = vinv * b;
      blocks_.h_xb.noalias() += c.x.transpose() * vb;
      blocks_.h_bb.noalias() += b.transpose() * vb;
      blocks_.b_b.noalias() += vb.transpose() * c.y;
    }
  }

  // Stacked partition-of-unity blocks share the constant function, so h_bb
  // carries an expected null space of dimension d2 - 1; anything beyond that
  // means the data cannot support this many knots.
  diag_.structural_nullity = data_.d2 >= 2 ? data_.d2 - 1 : 0;
  if (spline_dim_ > 0) {
    const PsdPinv p = psd_pinv(blocks_.h_bb);
    hbb_evec_ = p.evec;
    hbb_eval_ = p.eval;
    hbb_rank_ = p.rank;
    diag_.hbb_rank = p.rank;
    if (p.rank < spline_dim_ - diag_.structural_nullity)
      throw NumericError(
          "spline design is rank deficient beyond the shared constants; "
          "use fewer knots");
    const int first_kept = spline_dim_ - p.rank;
    diag_.hbb_min_eigen = hbb_eval_(first_kept) / data_.n;
    diag_.hbb_max_eigen = hbb_eval_(spline_dim_ - 1) / data_.n;

    proj_coef_ = hbb_pinv_apply(Eigen::MatrixXd(blocks_.h_xb.transpose()));
    piy_coef_ = hbb_pinv_apply(blocks_.b_b);
    schur_ = blocks_.h_xx - blocks_.h_xb * proj_coef_;
    reduced_rhs_ = blocks_.b_x - proj_coef_.transpose() * blocks_.b_b;
  } else {
    proj_coef_.resize(0, d1);
    piy_coef_.resize(0);
    schur_ = blocks_.h_xx;
    reduced_rhs_ = blocks_.b_x;
  }
  schur_ = 0.5 * (schur_ + schur_.transpose()).eval();

  xhat_.reserve(data_.clusters.size());
  for (std::size_t i = 0; i < data_.clusters.size(); ++i) {
    if (spline_dim_ > 0)
      xhat_.push_back(data_.clusters[i].x - design_[i] * proj_coef_);
    else
      xhat_.push_back(data_.clusters[i].x);
  }

  schur_llt_.compute(schur_);
  schur_pd_ = schur_llt_.info() == Eigen::Success;
  if (schur_pd_) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schur_);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    diag_.schur_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
  if (data_.n < d1)
    diag_.warnings.push_back(
        "fewer clusters than parametric covariates; sandwich covariance may be unstable");
}

Eigen::VectorXd ProfiledSystem::hbb_pinv_apply(const Eigen::VectorXd& rhs) const {
  const double cut = hbb_eval_.size() > 0 ? std::max(hbb_eval_.maxCoeff(), 0.0) * kNullThreshold : 0.0;
  Eigen::VectorXd coef = hbb_evec_.transpose() * rhs;
  for (int i = 0; i < coef.size(); ++i) coef(i) = hbb_eval_(i) > cut ? coef(i) / hbb_eval_(i) : 0.0;
  return hbb_evec_ * coef;
}

Eigen::MatrixXd ProfiledSystem::hbb_pinv_apply(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) out.col(c) = hbb_pinv_apply(Eigen::VectorXd(rhs.col(c)));
  return out;
}

Eigen::VectorXd ProfiledSystem::solve_beta() const {
  if (!schur_pd_)
    throw NumericError("collinear parametric covariates after spline projection");
  return schur_llt_.solve(reduced_rhs_);
}

Eigen::VectorXd ProfiledSystem::profile_gamma(const Eigen::VectorXd& beta) const {
  if (spline_dim_ == 0) return Eigen::VectorXd();
  return piy_coef_ - proj_coef_ * beta;
}

std::vector<Eigen::VectorXd> ProfiledSystem::residuals(const Eigen::VectorXd& beta,
                                                       const Eigen::VectorXd& gamma) const {
  std::vector<Eigen::VectorXd> resid;
  resid.reserve(data_.clusters.size());
  for (std::size_t i = 0; i < data_.clusters.size(); ++i) {
    Eigen::VectorXd e = data_.clusters[i].y - data_.clusters[i].x * beta;
    if (spline_dim_ > 0) e.noalias() -= design_[i] * gamma;
    resid.push_back(std::move(e));
  }
  return resid;
}

double ProfiledSystem::weighted_rss(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd gamma = profile_gamma(beta);
  double rss = 0.0;
  for (std::size_t i = 0; i < data_.clusters.size(); ++i) {
    Eigen::VectorXd e = data_.clusters[i].y - data_.clusters[i].x * beta;
    if (spline_dim_ > 0) e.noalias() -= design_[i] * gamma;
    rss += e.dot(vinv_[i] * e);
  }
  return rss;
}

Eigen::MatrixXd ProfiledSystem::meat(const std::vector<Eigen::VectorXd>& resid) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d1(), d1());
  for (std::size_t i = 0; i < resid.size(); ++i) {
    const Eigen::VectorXd g = xhat_[i].transpose() * (vinv_[i] * resid[i]);
    m.noalias() += g * g.transpose();
  }
  return m;
}

Eigen::MatrixXd ProfiledSystem::meat(const std::vector<Eigen::VectorXd>& resid,
                                     const std::vector<int>& cols) const {
  const int na = static_cast<int>(cols.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(na, na);
  for (std::size_t i = 0; i < resid.size(); ++i) {
    const Eigen::VectorXd gfull = xhat_[i].transpose() * (vinv_[i] * resid[i]);
    Eigen::VectorXd g(na);
    for (int k = 0; k < na; ++k) g(k) = gfull(cols[static_cast<std::size_t>(k)]);
    m.noalias() += g * g.transpose();
  }
  return m;
}

double ProfiledSystem::correlation_rss(const std::vector<Eigen::VectorXd>& resid) const {
  // e^T R^{-1} e = (d o e)^T V^{-1} (d o e) with d = sqrt(diag V).
  double rss = 0.0;
  for (std::size_t i = 0; i < resid.size(); ++i) {
    const Eigen::VectorXd scaled = rdiag_sqrt_[i].cwiseProduct(resid[i]);
    rss += scaled.dot(vinv_[i] * scaled);
  }
  return rss;
}

FitResult fit_unpenalized(const ProfiledSystem& sys) {
  FitResult fit;
  fit.diagnostics = sys.base_diagnostics();
  fit.beta = sys.solve_beta();
  fit.gamma = sys.profile_gamma(fit.beta);
  fit.residuals = sys.residuals(fit.beta, fit.gamma);

  // Centered curves: subtract the empirical mean of the fitted spline over
  // the observed covariate values; the removed constants add up to the
  // intercept shift.
  const ClusteredDataset& data = sys.data();
  int offset = 0;
  for (std::size_t l = 0; l < sys.spaces().size(); ++l) {
    const int dim = sys.spaces()[l].dimension();
    CenteredCurve curve;
    curve.space = sys.spaces()[l];
    curve.coef = fit.gamma.segment(offset, dim);
    double total = 0.0;
    for (std::size_t i = 0; i < data.clusters.size(); ++i)
      total += (sys.design()[i].middleCols(offset, dim) * curve.coef).sum();
    curve.center = total / data.n_total;
    fit.intercept_shift += curve.center;
    fit.eta.push_back(std::move(curve));
    offset += dim;
  }

  fit.omega = sandwich_covariance(sys, fit.residuals);
  fit.se = (fit.omega.diagonal() / data.n).cwiseMax(0.0).cwiseSqrt();
  return fit;
}

FitResult fit_unpenalized(const ClusteredDataset& data, const std::vector<SplineSpace>& spaces,
                          const WorkingCovarianceSpec& cov) {
  return fit_unpenalized(ProfiledSystem(data, spaces, cov));
}

std::vector<Eigen::MatrixXd> project_out_splines(const ClusteredDataset& data,
                                                 const std::vector<SplineSpace>& spaces,
                                                 const WorkingCovarianceSpec& cov) {
  return ProfiledSystem(data, spaces, cov).xhat();
}

Eigen::MatrixXd sandwich_covariance(const ProfiledSystem& sys,
                                    const std::vector<Eigen::VectorXd>& residuals) {
  const Eigen::MatrixXd meat = sys.meat(residuals);
  const Eigen::LLT<Eigen::MatrixXd> llt(sys.schur());
  if (llt.info() != Eigen::Success)
    throw NumericError("collinear parametric covariates after spline projection");
  const Eigen::MatrixXd sinv_meat = llt.solve(meat);
  Eigen::MatrixXd omega =
      static_cast<double>(sys.data().n) * llt.solve(sinv_meat.transpose()).transpose();
  return 0.5 * (omega + omega.transpose()).eval();
}

}  // namespace aplm
