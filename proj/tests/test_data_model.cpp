#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "aplm/data_model.hpp"
#include "aplm/rng.hpp"

using namespace aplm;

namespace {

Record make_record(const std::string& subject, double y, std::vector<double> x,
                   std::vector<double> z) {
  Record r;
  r.subject = subject;
  r.y = y;
  r.x = std::move(x);
  r.z = std::move(z);
  return r;
}

Cluster cluster_of_size(int m) {
  Cluster c;
  c.y = Eigen::VectorXd::Zero(m);
  c.x = Eigen::MatrixXd::Zero(m, 1);
  c.z = Eigen::MatrixXd::Zero(m, 1);
  return c;
}

}  // namespace

TEST_CASE("assemble_dataset groups by subject in first-appearance order") {
  std::vector<Record> rows;
  for (int j = 0; j < 3; ++j) rows.push_back(make_record("s2", 1.0 + j, {1.0}, {0.5}));
  for (int j = 0; j < 3; ++j) rows.push_back(make_record("s1", 4.0 + j, {2.0}, {0.25}));
  std::swap(rows[1], rows[4]);  // interleave: grouping must not require sorted input
  const ClusteredDataset data = assemble_dataset(rows);
  CHECK(data.n == 2);
  CHECK(data.n_total == 6);
  CHECK(data.clusters[0].size() == 3);
  CHECK(data.clusters[1].size() == 3);
  CHECK(data.clusters[0].y(0) == 1.0);  // s2 appeared first
  CHECK(data.clusters[1].y(0) == 5.0);  // s1's first row after the swap

  std::vector<Record> singletons = {make_record("a", 1, {0.0}, {0.1}),
                                    make_record("b", 2, {0.0}, {0.2}),
                                    make_record("c", 3, {0.0}, {0.3})};
  const ClusteredDataset single = assemble_dataset(singletons);
  CHECK(single.n == 3);
  for (const auto& c : single.clusters) CHECK(c.size() == 1);

  std::vector<Record> wide = {make_record("a", 1, std::vector<double>(8, 0.0),
                                          std::vector<double>(2, 0.5))};
  const ClusteredDataset shaped = assemble_dataset(wide);
  CHECK(shaped.d1 == 8);
  CHECK(shaped.d2 == 2);

  CHECK_THROWS_AS(assemble_dataset({}), DataError);
  std::vector<Record> ragged = {make_record("a", 1, {1.0, 2.0}, {0.5}),
                                make_record("a", 2, {1.0}, {0.5})};
  CHECK_THROWS_AS(assemble_dataset(ragged), DataError);
}

TEST_CASE("center_x removes pooled column means") {
  std::vector<Record> rows = {make_record("a", 1, {5.0, 1.0}, {0.1}),
                              make_record("a", 2, {5.0, 2.0}, {0.2}),
                              make_record("b", 3, {5.0, 3.0}, {0.3})};
  const ClusteredDataset data = assemble_dataset(rows);
  auto [centered, record] = center_x(data);
  CHECK(record.x_means(0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(record.x_means(1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(centered.clusters[0].x(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(centered.clusters[0].x(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(centered.clusters[1].x(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  auto [twice, record2] = center_x(centered);
  CHECK(std::abs(record2.x_means(0)) < 1e-12);
  CHECK(std::abs(twice.clusters[0].x(0, 1) - centered.clusters[0].x(0, 1)) < 1e-12);

  // pooled means are zero afterwards
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(2);
  for (const auto& c : centered.clusters) sums += c.x.colwise().sum().transpose();
  CHECK(sums.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rescale_z maps each coordinate onto [0,1]") {
  std::vector<Record> rows = {make_record("a", 1, {0.0}, {-1.0, 2.0}),
                              make_record("b", 2, {0.0}, {0.0, 4.0}),
                              make_record("c", 3, {0.0}, {1.0, 6.0})};
  auto [scaled, ranges] = rescale_z(assemble_dataset(rows));
  CHECK(ranges[0] == std::pair{-1.0, 1.0});
  CHECK(ranges[1] == std::pair{2.0, 6.0});
  CHECK(scaled.clusters[0].z(0, 0) == doctest::Approx(0.0));
  CHECK(scaled.clusters[1].z(0, 0) == doctest::Approx(0.5));
  CHECK(scaled.clusters[2].z(0, 0) == doctest::Approx(1.0));
  CHECK(scaled.clusters[1].z(0, 1) == doctest::Approx(0.5));

  std::vector<Record> unit = {make_record("a", 1, {0.0}, {0.0}),
                              make_record("b", 2, {0.0}, {0.25}),
                              make_record("c", 3, {0.0}, {1.0})};
  auto [kept, unit_ranges] = rescale_z(assemble_dataset(unit));
  CHECK(unit_ranges[0] == std::pair{0.0, 1.0});
  CHECK(kept.clusters[1].z(0, 0) == doctest::Approx(0.25).epsilon(1e-15));

  std::vector<Record> flat = {make_record("a", 1, {0.0}, {0.7}),
                              make_record("b", 2, {0.0}, {0.7})};
  CHECK_THROWS_AS(rescale_z(assemble_dataset(flat)), DataError);
}

TEST_CASE("working covariance structures") {
  Cluster c3 = cluster_of_size(3);

  CHECK(build_working_covariance({CovKind::WI, 0.0, {}}, c3)
            .isApprox(Eigen::MatrixXd::Identity(3, 3)));

  const Eigen::MatrixXd ex = build_working_covariance({CovKind::EX, 0.9, {}}, c3);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) CHECK(ex(j, k) == (j == k ? 1.0 : 0.9));

  const Eigen::MatrixXd ar = build_working_covariance({CovKind::AR1, 0.5, {}}, c3);
  CHECK(ar(0, 1) == doctest::Approx(0.5));
  CHECK(ar(0, 2) == doctest::Approx(0.25));
  CHECK(ar(2, 2) == 1.0);

  // RSM with the CD4-analysis variance components and times one year apart.
  Cluster timed = cluster_of_size(2);
  timed.times = Eigen::VectorXd(2);
  (*timed.times) << 0.0, 1.0;
  WorkingCovarianceSpec rsm{CovKind::RSM, 0.23, {11.32, 3.26, 22.15}};
  const Eigen::MatrixXd v = build_working_covariance(rsm, timed);
  CHECK(v(0, 0) == doctest::Approx(11.32 + 3.26 + 22.15).epsilon(1e-12));
  CHECK(v(0, 1) == doctest::Approx(3.26 + 22.15 * std::exp(-0.23)).epsilon(1e-12));
  CHECK(v(1, 0) == v(0, 1));

  CHECK_THROWS_AS(build_working_covariance(rsm, c3), DataError);  // no times
  CHECK_THROWS_AS(build_working_covariance({CovKind::EX, 1.0, {}}, c3), DataError);
  CHECK_THROWS_AS(build_working_covariance({CovKind::AR1, 1.0, {}}, c3), DataError);
  WorkingCovarianceSpec bad_rsm{CovKind::RSM, 0.23, {0.0, 1.0, 1.0}};
  CHECK_THROWS_AS(build_working_covariance(bad_rsm, timed), DataError);
}

TEST_CASE("EX legality bound is sharp per cluster size") {
  for (int m = 2; m <= 10; ++m) {
    Cluster c = cluster_of_size(m);
    const double bound = -1.0 / (m - 1);
    CHECK_THROWS_AS(build_working_covariance({CovKind::EX, bound, {}}, c), DataError);
    const Eigen::MatrixXd v = build_working_covariance({CovKind::EX, bound + 1e-3, {}}, c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("all structures stay positive definite across sizes 1..10") {
  for (int m = 1; m <= 10; ++m) {
    Cluster c = cluster_of_size(m);
    c.times = Eigen::VectorXd::LinSpaced(m, 0.0, m > 1 ? 2.0 : 0.0);
    std::vector<WorkingCovarianceSpec> specs = {
        {CovKind::WI, 0.0, {}},        {CovKind::EX, 0.9, {}},
        {CovKind::EX, -0.05, {}},      {CovKind::AR1, 0.7, {}},
        {CovKind::AR1, -0.6, {}},      {CovKind::RSM, 0.23, {11.32, 3.26, 22.15}}};
    for (const auto& spec : specs) {
      const Eigen::MatrixXd v = build_working_covariance(spec, c);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
      REQUIRE(es.eigenvalues().minCoeff() > 0.0);
      const Eigen::MatrixXd vinv = invert_covariance(v);
      REQUIRE(((v * vinv) - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("EX and WI are permutation equivariant") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 2 + static_cast<int>(rng.uniform() * 5);
    Cluster c = cluster_of_size(m);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(m);
    perm.setIdentity();
    for (int j = m - 1; j > 0; --j) {
      const int k = static_cast<int>(rng.uniform() * (j + 1));
      std::swap(perm.indices()(j), perm.indices()(k));
    }
    for (CovKind kind : {CovKind::WI, CovKind::EX}) {
      const WorkingCovarianceSpec spec{kind, 0.35, {}};
      const Eigen::MatrixXd v = build_working_covariance(spec, c);
      const Eigen::MatrixXd permuted = perm * v * perm.transpose();
      CHECK((permuted - v).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("invert_covariance basics and conditioning guard") {
  CHECK(invert_covariance(Eigen::MatrixXd::Identity(3, 3))
            .isApprox(Eigen::MatrixXd::Identity(3, 3)));

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const Eigen::MatrixXd dinv = invert_covariance(d);
  CHECK(dinv(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(dinv(1, 1) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(dinv(0, 1) == doctest::Approx(0.0));

  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(1, 1) = 1e-14;
  CHECK_THROWS_AS(invert_covariance(bad), NumericError);
  Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(2, 2);
  indef(1, 1) = -1.0;
  CHECK_THROWS_AS(invert_covariance(indef), NumericError);
}

TEST_CASE("moment estimator recovers the error correlation") {
  Rng rng(99);
  std::vector<Eigen::VectorXd> resid;
  const double alpha = 0.6;
  for (int i = 0; i < 4000; ++i) {
    const double shared = std::sqrt(alpha) * rng.normal();
    Eigen::VectorXd e(3);
    for (int j = 0; j < 3; ++j) e(j) = shared + std::sqrt(1.0 - alpha) * rng.normal();
    resid.push_back(e);
  }
  CHECK(estimate_alpha_moment(CovKind::EX, resid) == doctest::Approx(alpha).epsilon(0.05));
  CHECK(estimate_alpha_moment(CovKind::AR1, resid) == doctest::Approx(alpha).epsilon(0.05));
  CHECK_THROWS_AS(estimate_alpha_moment(CovKind::WI, resid), DataError);
}

TEST_CASE("select_x_columns keeps the requested design columns") {
  std::vector<Record> rows = {make_record("a", 1, {1.0, 2.0, 3.0}, {0.5}),
                              make_record("b", 2, {4.0, 5.0, 6.0}, {0.6})};
  const ClusteredDataset data = assemble_dataset(rows);
  const ClusteredDataset sub = select_x_columns(data, {2, 0});
  CHECK(sub.d1 == 2);
  CHECK(sub.clusters[0].x(0, 0) == 3.0);
  CHECK(sub.clusters[0].x(0, 1) == 1.0);
  CHECK_THROWS_AS(select_x_columns(data, {3}), DataError);
}

TEST_CASE("csv ingestion") {
  const std::string path = "tmp_test_data_model.csv";
  {
    std::ofstream out(path);
    out << "subject,y,x1,x2,z1,time\n";
    out << "s1,1.5,0.1,0.2,0.3,0\n";
    out << "s2,2.5,0.4,0.5,0.6,1\n";
    out << "s1,3.5,0.7,0.8,0.9,2\n";
  }
  const ClusteredDataset data = load_dataset_csv(path);
  CHECK(data.n == 2);
  CHECK(data.n_total == 3);
  CHECK(data.d1 == 2);
  CHECK(data.d2 == 1);
  REQUIRE(data.clusters[0].times.has_value());
  CHECK((*data.clusters[0].times)(1) == 2.0);
  CHECK(data.clusters[0].y(1) == 3.5);

  {
    std::ofstream out(path);
    out << "subject,y,x1,z1\n";
    out << "s1,1.0,2.0\n";  // short row
  }
  CHECK_THROWS_AS(load_dataset_csv(path), DataError);

  {
    std::ofstream out(path);
    out << "id,y,x1,z1\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(path), DataError);

  {
    std::ofstream out(path);
    out << "subject,y,x1,z1\n";
    out << "s1,1.0,abc,0.5\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(path), DataError);

  CHECK_THROWS_AS(load_dataset_csv("does_not_exist.csv"), DataError);
  std::remove(path.c_str());
}
