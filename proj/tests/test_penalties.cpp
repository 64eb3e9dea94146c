#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aplm/penalties.hpp"
#include "oracles.hpp"

using namespace aplm;

TEST_CASE("scad derivative branches") {
  CHECK(scad_derivative(0.5, 1.0, 3.7) == 1.0);                    // first branch
  CHECK(scad_derivative(3.7, 1.0, 3.7) == 0.0);                    // (a l - b)_+ vanishes
  CHECK(scad_derivative(2.0, 1.0, 3.7) ==
        doctest::Approx((3.7 - 2.0) / 2.7).epsilon(1e-15));
  CHECK(scad_derivative(0.3, 0.0, 3.7) == 0.0);

  // continuity at both joins
  CHECK(scad_derivative(1.0, 1.0, 3.7) ==
        doctest::Approx(scad_derivative(1.0 + 1e-12, 1.0, 3.7)).epsilon(1e-9));
  CHECK(scad_derivative(3.7 - 1e-12, 1.0, 3.7) == doctest::Approx(0.0).epsilon(1e-9));

  // nonincreasing on [0, inf)
  double prev = scad_derivative(0.0, 1.3, 3.7);
  for (int i = 1; i <= 600; ++i) {
    const double cur = scad_derivative(0.01 * i, 1.3, 3.7);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
  // zero tail beyond a*lambda
  for (int i = 0; i <= 50; ++i) CHECK(scad_derivative(3.7 * 1.3 + 0.1 * i, 1.3, 3.7) == 0.0);
}

TEST_CASE("scad penalty closed form") {
  CHECK(scad_penalty(0.0, 1.0, 3.7) == 0.0);
  CHECK(scad_penalty(100.0, 1.0, 3.7) == doctest::Approx(4.7 / 2.0).epsilon(1e-15));
  CHECK(scad_penalty(1e9, 0.5, 3.7) ==
        doctest::Approx((3.7 + 1.0) * 0.25 / 2.0).epsilon(1e-15));

  // matches quadrature of the derivative (trapezoid is exact between kinks)
  for (double lambda : {0.3, 1.0, 2.5}) {
    for (double b : {0.1, 0.5 * lambda, lambda, 2.0, 2.0 * lambda, 5.0 * lambda, 9.0}) {
      const double direct = scad_penalty(b, lambda, 3.7);
      const double quad = oracle::trapezoid_with_kinks(
          [&](double t) { return scad_derivative(t, lambda, 3.7); }, b,
          {lambda, 3.7 * lambda});
      CHECK(direct == doctest::Approx(quad).epsilon(1e-9));
    }
  }

  // derivative consistency off the kinks
  for (double b : {0.2, 0.7, 1.6, 2.9, 4.2}) {
    const double fd = oracle::central_difference(
        [](double t) { return scad_penalty(t, 1.1, 3.7); }, b);
    CHECK(fd == doctest::Approx(scad_derivative(b, 1.1, 3.7)).epsilon(1e-6));
  }
}

TEST_CASE("hard thresholding penalty") {
  CHECK(hard_penalty(0.0, 1.5) == 0.0);
  for (double b : {1.5, 2.0, 10.0}) CHECK(hard_penalty(b, 1.5) == 1.5 * 1.5);
  CHECK(hard_penalty(0.75, 1.5) == doctest::Approx(0.75 * 1.5 * 1.5).epsilon(1e-15));

  CHECK(hard_derivative(0.0, 2.0) == 4.0);
  CHECK(hard_derivative(2.0, 2.0) == 0.0);
  CHECK(hard_derivative(5.0, 2.0) == 0.0);
  const double fd = oracle::central_difference(
      [](double t) { return hard_penalty(t, 2.0); }, 0.3 * 2.0);
  CHECK(fd == doctest::Approx(hard_derivative(0.6, 2.0)).epsilon(1e-6));
}

TEST_CASE("lqa matrix entries") {
  PenaltySpec spec;
  spec.kind = PenaltyKind::SCAD;
  spec.lambdas = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::VectorXd beta(3);
  beta << 10.0, 0.0, 0.25;
  const Eigen::VectorXd diag = lqa_matrix(beta, spec);
  CHECK(diag(0) == 0.0);  // far beyond a lambda
  CHECK(diag(1) == doctest::Approx(0.5 / 1e-6).epsilon(1e-12));
  CHECK(diag(2) == doctest::Approx(0.5 / (1e-6 + 0.25)).epsilon(1e-9));
  CHECK(diag.minCoeff() >= 0.0);

  spec.lambdas.setZero();
  CHECK(lqa_matrix(beta, spec).cwiseAbs().maxCoeff() == 0.0);

  // intercept exemption
  spec.lambdas = Eigen::VectorXd::Constant(3, 0.5);
  spec.intercept_index = 1;
  const Eigen::VectorXd exempt = lqa_matrix(beta, spec);
  CHECK(exempt(1) == 0.0);
  spec.penalize_intercept = true;
  CHECK(lqa_matrix(beta, spec)(1) > 0.0);

  spec.lambdas = Eigen::VectorXd::Constant(2, 0.5);
  CHECK_THROWS_AS(lqa_matrix(beta, spec), DataError);
}

TEST_CASE("kind names round-trip") {
  CHECK(penalty_kind_from_name("scad") == PenaltyKind::SCAD);
  CHECK(penalty_kind_from_name("hard") == PenaltyKind::HARD);
  CHECK(penalty_kind_name(PenaltyKind::HARD) == std::string("hard"));
  CHECK_THROWS_AS(penalty_kind_from_name("lasso"), UsageError);
}
