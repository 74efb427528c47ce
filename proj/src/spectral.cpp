#include "evlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evlab/errors.hpp"

namespace evlab {

SpectralSet eig_pairs(const CMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("eig_pairs: square matrix required");
  const int n = static_cast<int>(a.rows());
  const double scale = std::max(1.0, a.norm());

  Eigen::ComplexEigenSolver<CMatrix> right(a, true);
  Eigen::ComplexEigenSolver<CMatrix> adj(a.adjoint(), true);
  if (right.info() != Eigen::Success || adj.info() != Eigen::Success)
    throw Error("eig_pairs: eigensolver did not converge");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    const Complex li = right.eigenvalues()(i), lj = right.eigenvalues()(j);
    if (li.real() != lj.real()) return li.real() < lj.real();
    return li.imag() < lj.imag();
  });

  // Greedy matching by |conj(mu_k) - lambda_i|, ties broken by index.
  std::vector<bool> used(n, false);
  SpectralSet set;
  set.source_digest = digest(a);
  set.triples.reserve(n);
  const double tol_biorth = 1e-10 * n;
  for (int idx : order) {
    const Complex lambda = right.eigenvalues()(idx);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (used[k]) continue;
      const double d = std::abs(std::conj(adj.eigenvalues()(k)) - lambda);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best < 0 || best_d > kTolEig * scale)
      throw DefectivePair("eig_pairs: no left match within tolerance");
    used[best] = true;

    EigenTriple t;
    t.lambda = lambda;
    t.u = right.eigenvectors().col(idx).normalized();
    t.v = adj.eigenvectors().col(best).normalized();
    Complex b = t.v.dot(t.u);  // v* u
    if (std::abs(b) < tol_biorth)
      throw DefectivePair("eig_pairs: |v*u| below tolerance (near-Jordan pair)");
    t.v *= std::polar(1.0, std::arg(b));  // make v* u real positive
    t.biorth = Complex(std::abs(b), 0.0);
    set.triples.push_back(std::move(t));
  }
  return set;
}

std::vector<EigenTriple> select_near(const SpectralSet& s, const std::vector<Complex>& targets,
                                     double epsilon) {
  const int n = s.dim();
  std::vector<int> picks;
  picks.reserve(targets.size());
  for (const Complex& z0 : targets) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(s.triples.size()); ++i) {
      const double d = std::abs(s.triples[i].lambda - z0);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    picks.push_back(best);
  }
  const double min_sep = std::pow(static_cast<double>(n), -0.5 + epsilon);
  for (std::size_t i = 0; i < picks.size(); ++i)
    for (std::size_t j = i + 1; j < picks.size(); ++j) {
      if (picks[i] == picks[j])
        throw SeparationViolated("select_near: two targets selected the same eigenvalue");
      const double d = std::abs(s.triples[picks[i]].lambda - s.triples[picks[j]].lambda);
      if (d < min_sep) throw SeparationViolated("select_near: selected eigenvalues too close");
    }
  std::vector<EigenTriple> out;
  out.reserve(picks.size());
  for (int p : picks) out.push_back(s.triples[p]);
  return out;
}

CMatrix overlap_matrix(const SpectralSet& s) {
  const int n = static_cast<int>(s.triples.size());
  const int dim = s.dim();
  CMatrix u(dim, n), vt(dim, n);
  for (int i = 0; i < n; ++i) {
    u.col(i) = s.triples[i].u;
    // rescale so that v_i* u_i = 1
    vt.col(i) = s.triples[i].v / std::conj(s.triples[i].biorth);
  }
  const CMatrix gu = u.adjoint() * u;    // gu(j,i) = <u_j, u_i>
  const CMatrix gv = vt.adjoint() * vt;  // gv(i,j) = <v_i, v_j>
  CMatrix o(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) o(i, j) = gu(j, i) * gv(i, j);
  return o;
}

ProjectionObservable::ProjectionObservable(RVector q, CMatrix w)
    : weights(std::move(q)), vectors(std::move(w)) {
  if (weights.size() != vectors.cols())
    throw DimensionMismatch("ProjectionObservable: one weight per vector required");
  if ((weights.array() <= 0.0).any())
    throw std::invalid_argument("ProjectionObservable: weights must be positive");
  const CMatrix gram = vectors.adjoint() * vectors;
  const double dev = (gram - CMatrix::Identity(rank(), rank())).cwiseAbs().maxCoeff();
  if (dev > 1e-12)
    throw std::invalid_argument("ProjectionObservable: vectors not orthonormal");
  frobenius_sq = weights.sum();
}

CMatrix ProjectionObservable::tt_matrix() const {
  return vectors * weights.asDiagonal() * vectors.adjoint();
}

ProjectionObservable canonical_observable(int n, const RVector& weights) {
  CMatrix w = CMatrix::Zero(n, weights.size());
  for (int k = 0; k < weights.size(); ++k) w(k, k) = 1.0;
  return ProjectionObservable(weights, std::move(w));
}

double projection_stat(const ProjectionObservable& t, const CVector& x) {
  if (t.dim() != x.size()) throw DimensionMismatch("projection_stat: dimension mismatch");
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (int k = 0; k < t.rank(); ++k) s += t.weights(k) * std::norm(t.vectors.col(k).dot(x));
  return n * s;
}

}  // namespace evlab
