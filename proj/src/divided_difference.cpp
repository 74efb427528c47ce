#include "evlab/divided_difference.hpp"

#include <cmath>
#include <stdexcept>

namespace evlab {

double log_exp_divided_difference(const RVector& nodes) {
  const int n = static_cast<int>(nodes.size());
  if (n < 1) throw std::invalid_argument("log_exp_divided_difference: empty node set");
  if (n == 1) return nodes(0);

  const double shift = nodes.maxCoeff();
  RMatrix t = RMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) t(i, i) = nodes(i) - shift;  // <= 0
  for (int i = 0; i + 1 < n; ++i) t(i, i + 1) = 1.0;

  // scale so the diagonal is mild, Taylor, then square back
  const double maxdiag = -t.diagonal().minCoeff();
  int squarings = 0;
  double m = std::max(maxdiag, 1.0);
  while (m > 1.0) {
    m *= 0.5;
    ++squarings;
  }
  t *= std::pow(0.5, squarings);

  RMatrix e = RMatrix::Identity(n, n);
  RMatrix term = RMatrix::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = (term * t) / static_cast<double>(k);
    e += term;
    if (term.cwiseAbs().maxCoeff() < 1e-22) break;
  }
  for (int s = 0; s < squarings; ++s) e = e * e;  // entrywise nonnegative

  const double corner = e(0, n - 1);
  if (!(corner > 0.0))
    throw std::runtime_error("log_exp_divided_difference: corner entry underflowed");
  return shift + std::log(corner);
}

double log_sphere_exp_integral_from_eigs(const RVector& eigs) {
  const int n = static_cast<int>(eigs.size());
  return std::lgamma(static_cast<double>(n)) + log_exp_divided_difference(-eigs);
}

double log_sphere_exp_integral(const CMatrix& b) {
  if (b.rows() != b.cols()) throw std::invalid_argument("log_sphere_exp_integral: square input");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (b + b.adjoint()), Eigen::EigenvaluesOnly);
  return log_sphere_exp_integral_from_eigs(es.eigenvalues());
}

}  // namespace evlab
