// Independent reference implementations used only by tests: a literal
// recursive B-spline evaluator, kink-aware quadrature, finite differences,
// a dense joint solver for the full normal equations, and exhaustive subset
// search over the exact penalized objective.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "aplm/data_model.hpp"
#include "aplm/estimator.hpp"
#include "aplm/penalties.hpp"
#include "aplm/rng.hpp"
#include "aplm/spline_basis.hpp"

namespace oracle {

// Cox-de Boor recursion straight from the definition, 0/0 := 0, last
// nonempty interval closed on the right.
inline double naive_bspline(const Eigen::VectorXd& k, int s, int d, double z) {
  if (d == 0) {
    const bool inside = (z >= k(s) && z < k(s + 1)) ||
                        (z == 1.0 && k(s) < k(s + 1) && k(s + 1) == 1.0);
    return inside ? 1.0 : 0.0;
  }
  double value = 0.0;
  const double dl = k(s + d) - k(s);
  if (dl > 0.0) value += (z - k(s)) / dl * naive_bspline(k, s, d - 1, z);
  const double dr = k(s + d + 1) - k(s + 1);
  if (dr > 0.0) value += (k(s + d + 1) - z) / dr * naive_bspline(k, s + 1, d - 1, z);
  return value;
}

inline Eigen::VectorXd naive_basis(const aplm::SplineSpace& space, double z) {
  Eigen::VectorXd vals(space.dimension());
  for (int s = 0; s < space.dimension(); ++s)
    vals(s) = naive_bspline(space.knots, s, space.degree, z);
  return vals;
}

// Trapezoid integration of f over [0, hi], exact for piecewise-linear f when
// the kink locations are passed in.
inline double trapezoid_with_kinks(const std::function<double(double)>& f, double hi,
                                   std::vector<double> kinks, int per_segment = 2000) {
  kinks.push_back(0.0);
  kinks.push_back(hi);
  std::sort(kinks.begin(), kinks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < kinks.size(); ++i) {
    const double a = std::min(std::max(kinks[i], 0.0), hi);
    const double b = std::min(std::max(kinks[i + 1], 0.0), hi);
    if (!(b > a)) continue;
    const double h = (b - a) / per_segment;
    double acc = 0.5 * (f(a) + f(b));
    for (int j = 1; j < per_segment; ++j) acc += f(a + h * j);
    total += acc * h;
  }
  return total;
}

inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Solves the full (beta, gamma) normal equations in one dense system and
// returns the beta block. Uses a rank-revealing decomposition unrelated to
// the library's solver path.
inline Eigen::VectorXd dense_joint_beta(const aplm::BlockSystem& blocks) {
  const int d1 = static_cast<int>(blocks.h_xx.rows());
  const int dim = static_cast<int>(blocks.h_bb.rows());
  Eigen::MatrixXd h(d1 + dim, d1 + dim);
  h.topLeftCorner(d1, d1) = blocks.h_xx;
  h.topRightCorner(d1, dim) = blocks.h_xb;
  h.bottomLeftCorner(dim, d1) = blocks.h_xb.transpose();
  h.bottomRightCorner(dim, dim) = blocks.h_bb;
  Eigen::VectorXd rhs(d1 + dim);
  rhs.head(d1) = blocks.b_x;
  rhs.tail(dim) = blocks.b_b;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(h);
  return cod.solve(rhs).head(d1);
}

// Exact penalized objective for a no-spline dataset.
inline double exact_objective(const aplm::ClusteredDataset& data,
                              const aplm::WorkingCovarianceSpec& cov,
                              const aplm::PenaltySpec& penalty, const Eigen::VectorXd& beta) {
  double q = 0.0;
  for (const auto& c : data.clusters) {
    const Eigen::MatrixXd vinv = aplm::invert_covariance(aplm::build_working_covariance(cov, c));
    const Eigen::VectorXd e = c.y - c.x * beta;
    q += e.dot(vinv * e);
  }
  double pen = 0.0;
  for (int k = 0; k < beta.size(); ++k) pen += aplm::penalty_value(penalty, k, std::abs(beta(k)));
  return 0.5 * q + static_cast<double>(data.n_total) * pen;
}

// Minimizes the exact penalized objective over every coefficient subset,
// evaluating each subset at its own weighted least-squares solution.
inline std::vector<int> best_subset(const aplm::ClusteredDataset& data,
                                    const aplm::WorkingCovarianceSpec& cov,
                                    const aplm::PenaltySpec& penalty) {
  const int d1 = data.d1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d1, d1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d1);
  for (const auto& c : data.clusters) {
    const Eigen::MatrixXd vinv = aplm::invert_covariance(aplm::build_working_covariance(cov, c));
    h.noalias() += c.x.transpose() * vinv * c.x;
    b.noalias() += c.x.transpose() * vinv * c.y;
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_set;
  for (unsigned mask = 0; mask < (1u << d1); ++mask) {
    std::vector<int> cols;
    for (int k = 0; k < d1; ++k)
      if (mask & (1u << k)) cols.push_back(k);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d1);
    if (!cols.empty()) {
      const int na = static_cast<int>(cols.size());
      Eigen::MatrixXd hs(na, na);
      Eigen::VectorXd bs(na);
      for (int r = 0; r < na; ++r) {
        bs(r) = b(cols[static_cast<std::size_t>(r)]);
        for (int c2 = 0; c2 < na; ++c2)
          hs(r, c2) = h(cols[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c2)]);
      }
      const Eigen::VectorXd sol = hs.ldlt().solve(bs);
      for (int r = 0; r < na; ++r) beta(cols[static_cast<std::size_t>(r)]) = sol(r);
    }
    const double obj = exact_objective(data, cov, penalty, beta);
    if (obj < best) {
      best = obj;
      best_set = cols;
    }
  }
  return best_set;
}

// Small synthetic clustered dataset: x standard normal, z uniform on [0,1],
// additive sine curves, exchangeable noise.
inline aplm::ClusteredDataset random_instance(aplm::Rng& rng, int n, int max_m, int d1, int d2,
                                              const Eigen::VectorXd& beta_true,
                                              double noise_sd = 0.5, double err_corr = 0.4) {
  aplm::ClusteredDataset data;
  data.d1 = d1;
  data.d2 = d2;
  data.n = n;
  for (int i = 0; i < n; ++i) {
    const int m = 1 + static_cast<int>(rng.uniform() * max_m);
    aplm::Cluster c;
    c.y.resize(m);
    c.x.resize(m, d1);
    c.z.resize(m, d2);
    const double shared = std::sqrt(err_corr) * rng.normal();
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < d1; ++k) c.x(j, k) = rng.normal();
      for (int l = 0; l < d2; ++l) c.z(j, l) = rng.uniform();
      double mean = c.x.row(j).dot(beta_true);
      for (int l = 0; l < d2; ++l)
        mean += std::sin(6.2831853071795865 * (c.z(j, l) - 0.5)) / (l + 1.0);
      c.y(j) = mean + noise_sd * (shared + std::sqrt(1.0 - err_corr) * rng.normal());
    }
    data.n_total += m;
    data.clusters.push_back(std::move(c));
  }
  return data;
}

}  // namespace oracle
