#include "aplm/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "aplm/estimator.hpp"

namespace aplm {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mad_of(const std::vector<double>& v) {
  const double med = median_of(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  return median_of(std::move(dev));
}

// Composite Simpson rule on an odd-length uniform grid over [0,1].
double simpson_unit(const std::vector<double>& f) {
  const std::size_t n = f.size();
  const double h = 1.0 / static_cast<double>(n - 1);
  double acc = f.front() + f.back();
  for (std::size_t i = 1; i + 1 < n; ++i) acc += f[i] * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

double sim_eta1(double z) { return std::sin(kTwoPi * (z - 0.5)); }

double sim_eta2(double z) { return z - 0.5 + std::sin(kTwoPi * (z - 0.5)); }

Eigen::VectorXd sim_beta0() {
  Eigen::VectorXd b(8);
  b << 3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0;
  return b;
}

const std::vector<int>& sim_active_set() {
  static const std::vector<int> active = {0, 1, 4};
  return active;
}

std::pair<double, double> sample_z_pair(Rng& rng, double mean, double sd, double corr) {
  const double tail = std::sqrt(std::max(1.0 - corr * corr, 0.0));
  // 10^4 consecutive rejections puts the acceptance rate below 1e-4.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const double z1 = mean + sd * g1;
    const double z2 = mean + sd * (corr * g1 + tail * g2);
    if (z1 >= 0.0 && z1 <= 1.0 && z2 >= 0.0 && z2 <= 1.0) return {z1, z2};
  }
  throw NumericError("rejection sampling of z failed: acceptance rate below 1e-4");
}

ClusteredDataset generate_replicate(const SimConfig& config, Rng& rng) {
  const Eigen::VectorXd beta0 = sim_beta0();
  const int m = config.cluster_size;
  const double a = config.error_alpha;

  ClusteredDataset data;
  data.d1 = 8;
  data.d2 = 2;
  data.n = config.n;
  data.n_total = config.n * m;
  data.clusters.reserve(static_cast<std::size_t>(config.n));
  for (int i = 0; i < config.n; ++i) {
    Cluster c;
    c.y.resize(m);
    c.x.resize(m, 8);
    c.z.resize(m, 2);
    for (int j = 0; j < m; ++j) {
      const auto [z1, z2] = sample_z_pair(rng, 0.0, 0.5, 0.9);
      c.z(j, 0) = z1;
      c.z(j, 1) = z2;
      for (int k = 0; k < 6; ++k) c.x(j, k) = rng.normal(0.0, 0.25);
      c.x(j, 6) = 3.0 * (1.0 - 2.0 * z1) * (1.0 - 2.0 * z2) + rng.normal(0.0, 0.25);
      c.x(j, 7) = rng.coin() ? -0.5 : 0.5;
    }
    // Exchangeable errors: shared component alpha, idiosyncratic 1 - alpha.
    const double shared = std::sqrt(a) * rng.normal();
    for (int j = 0; j < m; ++j) {
      const double eps = shared + std::sqrt(1.0 - a) * rng.normal();
      c.y(j) = c.x.row(j).dot(beta0) + sim_eta1(c.z(j, 0)) + sim_eta2(c.z(j, 1)) + eps;
    }
    data.clusters.push_back(std::move(c));
  }
  return data;
}

double model_error(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta0,
                   const ClusteredDataset& data) {
  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(data.d1, data.d1);
  for (const auto& c : data.clusters) moment.noalias() += c.x.transpose() * c.x;
  moment /= static_cast<double>(data.n_total);
  const Eigen::VectorXd delta = beta_hat - beta0;
  return delta.dot(moment * delta);
}

SdRow sd_metrics(const std::vector<double>& estimates, const std::vector<double>& ses) {
  if (estimates.size() < 2 || ses.size() != estimates.size())
    throw DataError("sd_metrics needs at least two replicates");
  SdRow row;
  row.sd = mad_of(estimates) / 0.6745;
  row.sd_m = median_of(ses);
  row.sd_mad = mad_of(ses) / 0.6745;
  return row;
}

namespace {

struct RepOutcome {
  bool excluded = false;
  Eigen::VectorXd beta_pen, se_pen;
  Eigen::VectorXd beta_or, se_or;
  Eigen::VectorXd beta_full, se_full;
  double me_pen = 0.0, me_or = 0.0, me_full = 0.0;
  std::array<double, 2> eta_l2{};
  std::array<bool, 3> covered{};
};

RepOutcome run_replicate(const SimConfig& config, int rep) {
  const Eigen::VectorXd beta0 = sim_beta0();
  Rng rng(config.seed, static_cast<std::uint64_t>(rep));
  const ClusteredDataset raw = generate_replicate(config, rng);
  auto [data, centering] = center_x(raw);

  std::vector<SplineSpace> spaces;
  for (int l = 0; l < data.d2; ++l)
    spaces.push_back(make_space(config.degree, config.interior_knots));

  RepOutcome out;

  // Working-independence pre-fit supplies residuals for the correlation
  // nuisance estimate.
  WorkingCovarianceSpec working{config.working, 0.0, {}};
  std::optional<ProfiledSystem> sys;
  if (config.working == CovKind::WI) {
    sys.emplace(data, spaces, working);
  } else {
    const FitResult wi_fit = fit_unpenalized(data, spaces, WorkingCovarianceSpec{});
    working.alpha = estimate_alpha_moment(config.working, wi_fit.residuals);
    sys.emplace(data, spaces, working);
  }

  const FitResult full = fit_unpenalized(*sys);
  out.beta_full = full.beta;
  out.se_full = full.se;
  out.me_full = model_error(full.beta, beta0, data);
  for (std::size_t k = 0; k < 3; ++k) {
    const int idx = sim_active_set()[k];
    out.covered[k] = std::abs(full.beta(idx) - beta0(idx)) <= 1.96 * full.se(idx);
  }

  // Integrated squared error of each centered curve against the true
  // component centered the same way (its empirical mean over the observed z).
  const int grid_points = 201;
  for (int l = 0; l < 2; ++l) {
    double center_true = 0.0;
    for (const auto& c : data.clusters)
      for (int j = 0; j < c.size(); ++j)
        center_true += l == 0 ? sim_eta1(c.z(j, 0)) : sim_eta2(c.z(j, 1));
    center_true /= static_cast<double>(data.n_total);
    std::vector<double> sq(grid_points);
    for (int g = 0; g < grid_points; ++g) {
      const double z = static_cast<double>(g) / (grid_points - 1);
      const double truth = (l == 0 ? sim_eta1(z) : sim_eta2(z)) - center_true;
      const double diff = full.eta[static_cast<std::size_t>(l)](z) - truth;
      sq[static_cast<std::size_t>(g)] = diff * diff;
    }
    out.eta_l2[static_cast<std::size_t>(l)] = simpson_unit(sq);
  }

  PenaltySpec penalty;
  penalty.kind = config.penalty;
  penalty.a = config.scad_a;
  penalty.epsilon = config.epsilon;
  auto [pen, path] = select_lambda(*sys, full, penalty, config.grid.values());
  out.beta_pen = pen.beta;
  out.se_pen = pen.se;
  out.me_pen = model_error(pen.beta, beta0, data);

  // Oracle refit on the true support, embedded back into full coordinates.
  const ClusteredDataset oracle_data = select_x_columns(data, sim_active_set());
  const FitResult oracle = fit_unpenalized(oracle_data, spaces, working);
  out.beta_or = Eigen::VectorXd::Zero(data.d1);
  out.se_or = Eigen::VectorXd::Zero(data.d1);
  for (std::size_t k = 0; k < sim_active_set().size(); ++k) {
    out.beta_or(sim_active_set()[k]) = oracle.beta(static_cast<int>(k));
    out.se_or(sim_active_set()[k]) = oracle.se(static_cast<int>(k));
  }
  out.me_or = model_error(out.beta_or, beta0, data);
  return out;
}

MetricsRow aggregate_row(const std::vector<const RepOutcome*>& reps, const Eigen::VectorXd& beta0,
                         bool penalized) {
  MetricsRow row;
  std::vector<double> rme;
  double sum_sq = 0.0;
  for (const RepOutcome* r : reps) {
    const Eigen::VectorXd& beta = penalized ? r->beta_pen : r->beta_or;
    int correct = 0;
    int incorrect = 0;
    for (int k = 0; k < beta0.size(); ++k) {
      if (beta(k) == 0.0) (beta0(k) == 0.0 ? correct : incorrect) += 1;
    }
    row.c += correct;
    row.i += incorrect;
    const double me = penalized ? r->me_pen : r->me_or;
    if (r->me_full > 0.0) rme.push_back(me / r->me_full);
    sum_sq += (beta - beta0).squaredNorm();
  }
  const double used = static_cast<double>(reps.size());
  row.c /= used;
  row.i /= used;
  row.mrme = 100.0 * median_of(std::move(rme));
  row.rmse = std::sqrt(sum_sq / used);
  return row;
}

}  // namespace

SimMetrics run_study(const SimConfig& config) {
  if (config.n < 10) throw DataError("simulation needs n >= 10 clusters");
  if (config.replicates < 1) throw DataError("simulation needs at least one replicate");

  std::vector<std::optional<RepOutcome>> results(static_cast<std::size_t>(config.replicates));
  const int threads = std::max(1, std::min(config.threads, config.replicates));
  if (threads == 1) {
    for (int r = 0; r < config.replicates; ++r) {
      try {
        results[static_cast<std::size_t>(r)] = run_replicate(config, r);
      } catch (const NumericError&) {
        RepOutcome failed;
        failed.excluded = true;
        results[static_cast<std::size_t>(r)] = std::move(failed);
      }
    }
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= config.replicates) return;
        try {
          results[static_cast<std::size_t>(r)] = run_replicate(config, r);
        } catch (const NumericError&) {
          RepOutcome failed;
          failed.excluded = true;
          results[static_cast<std::size_t>(r)] = std::move(failed);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Aggregation runs in replicate order, so the metrics are identical for
  // any thread count.
  std::vector<const RepOutcome*> usable;
  int excluded = 0;
  for (const auto& r : results) {
    if (!r.has_value() || r->excluded)
      ++excluded;
    else
      usable.push_back(&*r);
  }
  if (usable.empty()) throw NumericError("all replicates failed or diverged");

  const Eigen::VectorXd beta0 = sim_beta0();
  SimMetrics metrics;
  metrics.excluded = excluded;
  metrics.replicates_used = static_cast<int>(usable.size());
  metrics.penalized = aggregate_row(usable, beta0, true);
  metrics.oracle = aggregate_row(usable, beta0, false);

  double full_sq = 0.0;
  int exact = 0;
  for (const RepOutcome* r : usable) {
    full_sq += (r->beta_full - beta0).squaredNorm();
    bool match = true;
    for (int k = 0; k < beta0.size(); ++k)
      if ((r->beta_pen(k) != 0.0) != (beta0(k) != 0.0)) match = false;
    if (match) ++exact;
    for (std::size_t k = 0; k < 3; ++k) metrics.coverage[k] += r->covered[k] ? 1.0 : 0.0;
    for (std::size_t l = 0; l < 2; ++l) metrics.eta_l2[l] += r->eta_l2[l];
  }
  const double used = static_cast<double>(usable.size());
  metrics.full_rmse = std::sqrt(full_sq / used);
  metrics.exact_support_rate = static_cast<double>(exact) / used;
  for (std::size_t k = 0; k < 3; ++k) metrics.coverage[k] /= used;
  for (std::size_t l = 0; l < 2; ++l) metrics.eta_l2[l] /= used;

  if (usable.size() >= 2) {
    for (std::size_t k = 0; k < 3; ++k) {
      const int idx = sim_active_set()[k];
      std::vector<double> est_pen, se_pen, est_or, se_or;
      for (const RepOutcome* r : usable) {
        est_pen.push_back(r->beta_pen(idx));
        se_pen.push_back(r->se_pen(idx));
        est_or.push_back(r->beta_or(idx));
        se_or.push_back(r->se_or(idx));
      }
      metrics.sd_penalized[k] = sd_metrics(est_pen, se_pen);
      metrics.sd_oracle[k] = sd_metrics(est_or, se_or);
    }
  }
  return metrics;
}

}  // namespace aplm
