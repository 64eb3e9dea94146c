#include "aplm/penalized_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aplm {

std::vector<double> LambdaGrid::values() const {
  if (size < 1 || !(min > 0.0) || !(max >= min))
    throw DataError("lambda grid requires 0 < min <= max and size >= 1");
  std::vector<double> v(static_cast<std::size_t>(size));
  if (size == 1) {
    v[0] = min;
    return v;
  }
  const double lo = std::log(min);
  const double hi = std::log(max);
  for (int i = 0; i < size; ++i)
    v[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (size - 1));
  return v;
}

Eigen::VectorXd lqa_step(const Eigen::VectorXd& beta, const ProfiledSystem& sys,
                         const PenaltySpec& penalty) {
  const Eigen::VectorXd w = lqa_matrix(beta, penalty);
  Eigen::MatrixXd a = sys.schur();
  a.diagonal() += static_cast<double>(sys.n_total()) * w;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("singular LQA ridge system");
  return llt.solve(sys.reduced_rhs());
}

double penalized_objective(const Eigen::VectorXd& beta, const ProfiledSystem& sys,
                           const PenaltySpec& penalty) {
  double pen = 0.0;
  for (int k = 0; k < beta.size(); ++k) pen += penalty_value(penalty, k, std::abs(beta(k)));
  return 0.5 * sys.weighted_rss(beta) + static_cast<double>(sys.n_total()) * pen;
}

namespace {

Eigen::VectorXd expand(const Eigen::VectorXd& values, const std::vector<int>& cols, int d1) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(d1);
  for (std::size_t k = 0; k < cols.size(); ++k)
    full(cols[k]) = values(static_cast<int>(k));
  return full;
}

}  // namespace

PenalizedFit solve_penalized(const ProfiledSystem& sys, PenaltySpec penalty,
                             const Eigen::VectorXd& beta_init, const SolveOptions& opts) {
  const int d1 = sys.d1();
  if (penalty.lambdas.size() != d1)
    throw DataError("penalty lambda vector does not match coefficient count");
  const double n_t = static_cast<double>(sys.n_total());
  const double zero_tol =
      opts.zero_tol_scale * std::max(1.0, beta_init.lpNorm<Eigen::Infinity>());
  const double obj_slack_scale = 1e-10;

  std::vector<int> active(static_cast<std::size_t>(d1));
  for (int k = 0; k < d1; ++k) active[static_cast<std::size_t>(k)] = k;

  PenalizedFit fit;
  fit.lambda_vector = penalty.lambdas;
  fit.beta = beta_init;
  if (opts.record_objective)
    fit.objective_trace.push_back(penalized_objective(fit.beta, sys, penalty));

  for (int it = 1; it <= opts.max_iter; ++it) {
    fit.iterations = it;
    const int na = static_cast<int>(active.size());
    Eigen::VectorXd beta_next = Eigen::VectorXd::Zero(d1);
    if (na > 0) {
      Eigen::MatrixXd a(na, na);
      Eigen::VectorXd rhs(na);
      const Eigen::VectorXd w = lqa_matrix(fit.beta, penalty);
      for (int r = 0; r < na; ++r) {
        const int kr = active[static_cast<std::size_t>(r)];
        rhs(r) = sys.reduced_rhs()(kr);
        for (int c = 0; c < na; ++c) a(r, c) = sys.schur()(kr, active[static_cast<std::size_t>(c)]);
        a(r, r) += n_t * w(kr);
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success) throw NumericError("singular LQA ridge system");
      const Eigen::VectorXd sol = llt.solve(rhs);
      beta_next = expand(sol, active, d1);
    }

    // Freeze coefficients that fell below the zero threshold, unless zeroing
    // them would push the exact objective above the previous iterate's value;
    // those keep shrinking and are frozen on a later pass.
    std::vector<int> survivors;
    survivors.reserve(active.size());
    bool any_frozen = false;
    Eigen::VectorXd beta_frozen = beta_next;
    for (int k : active) {
      if (std::abs(beta_next(k)) < zero_tol) {
        beta_frozen(k) = 0.0;
        any_frozen = true;
      } else {
        survivors.push_back(k);
      }
    }
    if (any_frozen) {
      const double obj_prev = penalized_objective(fit.beta, sys, penalty);
      const double obj_frozen = penalized_objective(beta_frozen, sys, penalty);
      if (obj_frozen <= obj_prev + obj_slack_scale * (1.0 + std::abs(obj_prev))) {
        beta_next = beta_frozen;
        active = std::move(survivors);
      }
    }

    const double delta = (beta_next - fit.beta).lpNorm<Eigen::Infinity>();
    fit.beta = beta_next;
    if (opts.record_objective) fit.objective_trace.push_back(penalized_objective(fit.beta, sys, penalty));
    if (delta < opts.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.active_set.clear();
  for (int k = 0; k < d1; ++k)
    if (fit.beta(k) != 0.0) fit.active_set.push_back(k);
  fit.gamma = sys.profile_gamma(fit.beta);
  fit.se = penalized_se(fit, sys, penalty);
  fit.effective_params = effective_parameters(fit, sys, penalty);
  fit.bic = bic_score(fit, sys);
  return fit;
}

PenalizedFit solve_penalized(const ClusteredDataset& data, const std::vector<SplineSpace>& spaces,
                             const WorkingCovarianceSpec& cov, const PenaltySpec& penalty,
                             const Eigen::VectorXd& lambda_vector, const SolveOptions& opts) {
  ProfiledSystem sys(data, spaces, cov);
  PenaltySpec spec = penalty;
  spec.lambdas = lambda_vector;
  return solve_penalized(sys, spec, sys.solve_beta(), opts);
}

Eigen::VectorXd penalized_se(const PenalizedFit& fit, const ProfiledSystem& sys,
                             const PenaltySpec& penalty) {
  Eigen::VectorXd se = Eigen::VectorXd::Zero(sys.d1());
  const std::vector<int>& active = fit.active_set;
  const int na = static_cast<int>(active.size());
  if (na == 0) return se;

  const double n_t = static_cast<double>(sys.n_total());
  const Eigen::VectorXd w = lqa_matrix(fit.beta, penalty);
  Eigen::MatrixXd bread(na, na);
  for (int r = 0; r < na; ++r) {
    const int kr = active[static_cast<std::size_t>(r)];
    for (int c = 0; c < na; ++c) bread(r, c) = sys.schur()(kr, active[static_cast<std::size_t>(c)]);
    bread(r, r) += n_t * w(kr);
  }
  const std::vector<Eigen::VectorXd> resid = sys.residuals(fit.beta, fit.gamma);
  const Eigen::MatrixXd meat = sys.meat(resid, active);
  const Eigen::LLT<Eigen::MatrixXd> llt(bread);
  if (llt.info() != Eigen::Success) throw NumericError("singular bread matrix in sandwich formula");
  const Eigen::MatrixXd cov = llt.solve(llt.solve(meat).transpose()).transpose();
  for (int k = 0; k < na; ++k)
    se(active[static_cast<std::size_t>(k)]) = std::sqrt(std::max(cov(k, k), 0.0));
  return se;
}

double effective_parameters(const PenalizedFit& fit, const ProfiledSystem& sys,
                            const PenaltySpec& penalty) {
  const std::vector<int>& active = fit.active_set;
  const int na = static_cast<int>(active.size());
  if (na == 0) return 0.0;
  const double n_t = static_cast<double>(sys.n_total());
  const Eigen::VectorXd w = lqa_matrix(fit.beta, penalty);
  Eigen::MatrixXd qdd(na, na);
  Eigen::MatrixXd ridge(na, na);
  for (int r = 0; r < na; ++r) {
    const int kr = active[static_cast<std::size_t>(r)];
    for (int c = 0; c < na; ++c) qdd(r, c) = sys.schur()(kr, active[static_cast<std::size_t>(c)]);
  }
  ridge = qdd;
  for (int r = 0; r < na; ++r) ridge(r, r) += n_t * w(active[static_cast<std::size_t>(r)]);
  const Eigen::LLT<Eigen::MatrixXd> llt(ridge);
  if (llt.info() != Eigen::Success) throw NumericError("singular ridge system in e(lambda)");
  return llt.solve(qdd).trace();
}

double bic_score(const PenalizedFit& fit, const ProfiledSystem& sys) {
  const std::vector<Eigen::VectorXd> resid = sys.residuals(fit.beta, fit.gamma);
  const double n_t = static_cast<double>(sys.n_total());
  const double mean_quad = sys.correlation_rss(resid) / n_t;
  if (!(mean_quad > 1e-300)) return kPerfectFitBic;
  return std::log(mean_quad) + std::log(n_t) / n_t * fit.effective_params;
}

std::pair<PenalizedFit, TuningPath> select_lambda(
    const ProfiledSystem& sys, const FitResult& unpenalized, PenaltySpec penalty,
    const std::vector<double>& grid, const SolveOptions& opts, const Eigen::VectorXd* se_scale) {
  const Eigen::VectorXd scale = se_scale != nullptr ? *se_scale : unpenalized.se;
  if (scale.size() != sys.d1()) throw DataError("per-coefficient scale has wrong length");

  TuningPath path;
  path.grid = grid;
  if (std::adjacent_find(grid.begin(), grid.end(),
                         [](double a, double b) { return a >= b; }) != grid.end())
    throw DataError("lambda grid must be strictly increasing");

  PenalizedFit best;
  bool have_best = false;
  for (double lambda : grid) {
    PenaltySpec spec = penalty;
    spec.lambdas = lambda * scale;
    if (spec.intercept_index >= 0 && !spec.penalize_intercept)
      spec.lambdas(spec.intercept_index) = 0.0;
    PenalizedFit fit = solve_penalized(sys, spec, unpenalized.beta, opts);
    fit.lambda_scalar = lambda;
    TuningRecord rec;
    rec.lambda = lambda;
    rec.active_size = static_cast<int>(fit.active_set.size());
    rec.bic = fit.bic;
    rec.e_lambda = fit.effective_params;
    rec.converged = fit.converged;
    path.records.push_back(rec);
    // <= keeps the larger lambda (sparser model) on BIC ties.
    if (fit.converged && (!have_best || fit.bic <= best.bic)) {
      best = std::move(fit);
      have_best = true;
    }
  }
  if (!have_best) throw NumericError("no lambda in the grid produced a converged fit");
  return {std::move(best), std::move(path)};
}

}  // namespace aplm
