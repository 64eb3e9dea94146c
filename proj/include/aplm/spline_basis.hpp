#pragma once

#include <Eigen/Dense>
#include <vector>

#include "aplm/data_model.hpp"

namespace aplm {

// Clamped B-spline space on [0,1] with equally spaced interior knots.
// The full knot vector has multiplicity degree+1 at both boundaries, so the
// basis dimension is J_n = interior_knots + degree + 1.
struct SplineSpace {
  int degree = 3;
  int interior_knots = 0;
  Eigen::VectorXd knots;  // padded, length interior_knots + 2*(degree+1)

  int dimension() const { return interior_knots + degree + 1; }
};

// Space of degree q with N interior knots at s/(N+1), s = 1..N. Requires
// q >= 1, N >= 0.
SplineSpace make_space(int degree, int interior_knots);

// Interior-knot count from the J_n ~ n^{1/(2p)} log(n) growth rule with unit
// proportionality constant: N = max(1, round(n^{1/(2p)} log n) - q - 1).
int default_interior_knots(int n, int p, int degree);

// All J_n basis values at z in [0,1] via the triangular recursion on the
// clamped knot vector; the last interval is closed on the right so z = 1 is
// valid. Entries are nonnegative, sum to one, and at most degree+1
// consecutive entries are nonzero.
Eigen::VectorXd eval_basis(const SplineSpace& space, double z);

// Stacked per-observation design for one cluster: row j is the concatenation
// over coordinates l of eval_basis(spaces[l], z(j, l)). Z must be in [0,1].
Eigen::MatrixXd build_design(const std::vector<SplineSpace>& spaces, const Cluster& cluster);

// Total stacked dimension, sum of per-coordinate J_n.
int total_dimension(const std::vector<SplineSpace>& spaces);

}  // namespace aplm
