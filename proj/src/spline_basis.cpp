#include "aplm/spline_basis.hpp"

#include <algorithm>
#include <cmath>

namespace aplm {

SplineSpace make_space(int degree, int interior_knots) {
  if (degree < 1) throw DataError("spline degree must be >= 1");
  if (interior_knots < 0) throw DataError("interior knot count must be >= 0");
  SplineSpace space;
  space.degree = degree;
  space.interior_knots = interior_knots;
  space.knots.resize(interior_knots + 2 * (degree + 1));
  int pos = 0;
  for (int i = 0; i <= degree; ++i) space.knots(pos++) = 0.0;
  for (int s = 1; s <= interior_knots; ++s)
    space.knots(pos++) = static_cast<double>(s) / (interior_knots + 1);
  for (int i = 0; i <= degree; ++i) space.knots(pos++) = 1.0;
  return space;
}

int default_interior_knots(int n, int p, int degree) {
  if (n < 2) throw DataError("default knot rule needs n >= 2");
  if (p < 1) throw DataError("smoothness order p must be >= 1");
  const double jn = std::pow(static_cast<double>(n), 1.0 / (2.0 * p)) *
                    std::log(static_cast<double>(n));
  const int n_knots = static_cast<int>(std::lround(jn)) - degree - 1;
  return std::max(1, n_knots);
}

Eigen::VectorXd eval_basis(const SplineSpace& space, double z) {
  if (!(z >= 0.0 && z <= 1.0))
    throw DataError("spline argument outside [0,1]: z = " + std::to_string(z));

  const int q = space.degree;
  const int n_int = space.interior_knots;
  const Eigen::VectorXd& k = space.knots;

  // Knot span i with k[i] <= z < k[i+1]; the search covers indices q..q+N and
  // lands on the last span for z = 1 (right-closed last interval).
  const double* lo = k.data() + q;
  const double* hi = k.data() + q + n_int + 1;
  int span = static_cast<int>(std::upper_bound(lo, hi, z) - k.data()) - 1;
  span = std::min(std::max(span, q), q + n_int);

  // Triangular recursion over the q+1 basis functions alive on the span.
  Eigen::VectorXd vals = Eigen::VectorXd::Zero(space.dimension());
  std::vector<double> nval(static_cast<std::size_t>(q) + 1, 0.0);
  std::vector<double> left(static_cast<std::size_t>(q) + 1, 0.0);
  std::vector<double> right(static_cast<std::size_t>(q) + 1, 0.0);
  nval[0] = 1.0;
  for (int j = 1; j <= q; ++j) {
    left[static_cast<std::size_t>(j)] = z - k(span + 1 - j);
    right[static_cast<std::size_t>(j)] = k(span + j) - z;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<std::size_t>(r) + 1] + left[static_cast<std::size_t>(j - r)];
      const double tmp = nval[static_cast<std::size_t>(r)] / denom;
      nval[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r) + 1] * tmp;
      saved = left[static_cast<std::size_t>(j - r)] * tmp;
    }
    nval[static_cast<std::size_t>(j)] = saved;
  }
  for (int r = 0; r <= q; ++r) vals(span - q + r) = nval[static_cast<std::size_t>(r)];
  return vals;
}

int total_dimension(const std::vector<SplineSpace>& spaces) {
  int dim = 0;
  for (const auto& s : spaces) dim += s.dimension();
  return dim;
}

Eigen::MatrixXd build_design(const std::vector<SplineSpace>& spaces, const Cluster& cluster) {
  if (static_cast<int>(spaces.size()) != cluster.z.cols())
    throw DataError("spline space count does not match nonparametric covariate count");
  const int m = cluster.size();
  Eigen::MatrixXd design(m, total_dimension(spaces));
  for (int j = 0; j < m; ++j) {
    int offset = 0;
    for (std::size_t l = 0; l < spaces.size(); ++l) {
      const int dim = spaces[l].dimension();
      design.row(j).segment(offset, dim) =
          eval_basis(spaces[l], cluster.z(j, static_cast<int>(l))).transpose();
      offset += dim;
    }
  }
  return design;
}

}  // namespace aplm
