#pragma once

#include <cstdint>
#include <vector>

#include "evlab/common.hpp"

namespace evlab {

/// Eigenvalue with paired unit right/left eigenvectors. Phase convention:
/// v* u is real and >= 0 (stored in `biorth`).
struct EigenTriple {
  Complex lambda;
  CVector u;       // right: (A - lambda) u = 0
  CVector v;       // left:  v* (A - lambda) = 0, i.e. A* v = conj(lambda) v
  Complex biorth;  // v* u after phase fixing
};

struct SpectralSet {
  std::uint64_t source_digest = 0;
  std::vector<EigenTriple> triples;  // sorted by (Re lambda, Im lambda)
  int dim() const { return triples.empty() ? 0 : static_cast<int>(triples.front().u.size()); }
};

inline constexpr double kTolEig = 1e-8;

/// Right eigenvectors from A, left from A* (eigenvalue conj(lambda)), matched
/// greedily by conjugate-eigenvalue distance. Throws DefectivePair when a match
/// is farther than kTolEig * ||A||_F or |v*u| < 1e-10 * N.
SpectralSet eig_pairs(const CMatrix& a);

/// Nearest eigenvalue per target. Throws SeparationViolated when two targets
/// select the same eigenvalue or two selected eigenvalues are closer than
/// N^(-1/2 + epsilon).
std::vector<EigenTriple> select_near(const SpectralSet& s, const std::vector<Complex>& targets,
                                     double epsilon);

/// Overlap matrix O_ij = <u_j, u_i> <v_i, v_j> with the left vectors rescaled to
/// v_i* u_j = delta_ij. Diagonal is real >= 1; rows sum to 1.
CMatrix overlap_matrix(const SpectralSet& s);

/// Finite-rank observable stored through the spectral decomposition of T*T:
/// T*T = sum_k q_k w_k w_k*, with q_k > 0 and orthonormal w_k.
struct ProjectionObservable {
  RVector weights;  // q_k
  CMatrix vectors;  // columns w_k, pairwise orthonormal
  double frobenius_sq = 0.0;

  ProjectionObservable(RVector q, CMatrix w);
  int rank() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(vectors.rows()); }
  /// Dense T*T, for oracle-style checks.
  CMatrix tt_matrix() const;
};

/// Canonical-basis observable of given weights on C^n (w_k = e_k).
ProjectionObservable canonical_observable(int n, const RVector& weights);

/// N * sum_k q_k |w_k* x|^2 for a unit vector x.
double projection_stat(const ProjectionObservable& t, const CVector& x);

}  // namespace evlab
