#pragma once

#include <optional>
#include <vector>

#include "evlab/common.hpp"
#include "evlab/rng.hpp"
#include "evlab/spectral.hpp"

namespace evlab {

/// R(u) = I - 2 (e1 - u)(e1 - u)* / ||e1 - u||^2, with R(e1) = I when
/// ||e1 - u|| < 1e-14. Unitary, Hermitian, involutive; R(u) e1 = u whenever
/// the first coordinate of u is real.
CMatrix householder(const CVector& u);

/// One transform step. `sphere_point` is u^{(j-1)} (right) or v^{(j-1)} (left),
/// phase-fixed so its first coordinate is real and nonnegative. When a
/// reference matrix rides along, `a_diag` and `offblock` hold a_j and b_j
/// (right steps) or c_j (left steps) from conjugating it with the same
/// reflection.
struct DeflationStep {
  Side side = Side::Right;
  Complex lambda;
  CVector sphere_point;
  CVector w;
  Complex a_diag;
  CVector offblock;
  bool has_reference = false;
};

struct DeflationChain {
  std::vector<DeflationStep> steps;  // applied in order: step 0 outermost
  CMatrix residual;                  // M^{(m)}
  std::vector<CMatrix> reference_blocks;  // A^{(0..m)} when a reference is tracked

  int full_dim() const {
    return static_cast<int>(residual.rows()) + static_cast<int>(steps.size());
  }
};

/// Composes the wrap-and-reflect steps back into the full matrix: each right
/// step conjugates [[lambda, w*], [0, M]] by R(sphere_point), each left step
/// conjugates [[lambda, 0], [w, M]].
CMatrix phi_forward(const DeflationChain& chain);

/// Inverse of phi_forward: peels `sides.size()` eigenvalues off A by successive
/// Householder conjugation, right steps first. `selected` supplies the target
/// eigenvalues (nearest eigenvalue of the current block is used at each step).
/// When `reference` is given it is conjugated alongside and its blocks kept.
DeflationChain deflate(const CMatrix& a, const std::vector<Complex>& selected,
                       const std::vector<Side>& sides, const CMatrix* reference = nullptr);

/// Random chain data for Jacobian experiments: unit sphere points (first
/// coordinate real positive), standard complex Gaussian w, lambda, residual.
DeflationChain random_chain(int n, int m_right, int m_left, Stream& rng);

struct JacobianCheck {
  double fd_value = 0.0;       // |det dPhi| on the phase-fixed chart / chart factor
  double formula_value = 0.0;  // |Delta(lambda)|^2 prod_j |det(lambda_j - M^(m))|^2
  double rel_error = 0.0;      // |fd - formula| / max(formula, eps)
};

/// Central-difference Jacobian determinant of phi_forward on the local chart
/// that fixes each sphere point's phase (first coordinate real positive); the
/// chart factor prod_j u1^{(j-1)} is divided out so only the density factor
/// remains. Throws FDInstability when step sizes h and h/2 disagree by > 10%.
JacobianCheck jacobian_fd_check(const DeflationChain& chain, double h = 1e-6);

/// Eigenvector transport through one deflation step: given (lambda, x) eigen
/// data of the inner block M^{(j)}, returns the corresponding eigenvector of
/// M^{(j-1)}. `vector_side` says whether x is a right or a left eigenvector.
/// Throws EigenvalueCollision when |lambda - step.lambda| < 1e-12.
CVector evec_reconstruct(const DeflationStep& step, Complex lambda, const CVector& x,
                         Side vector_side);

/// Repeated transport through steps j0..1 of the chain.
CVector evec_reconstruct_chain(const DeflationChain& chain, int j0, Complex lambda,
                               const CVector& x, Side vector_side);

/// log K_q ingredients: the spherical integral of
///   exp{-(N/t) u* [(A-lam)*(A-lam) + eta^2 - t q T*T] u}
/// against the determinant prediction log det[I - t q H_lam(eta) T*T]^{-1},
/// with eta = eta_{lam,t}. Throws PositivityLost when q > 0 destroys positive
/// definiteness of the quadratic form.
struct KqRatio {
  double log_ratio = 0.0;  // log K_q - log K_0
  double log_det = 0.0;    // log det[I - t q H T*T]^{-1}
  double gap = 0.0;        // log_ratio - log_det
  double eta = 0.0;
};

KqRatio kq_ratio_check(const CMatrix& a, Complex lambda, double t, double q,
                       const ProjectionObservable& obs);

/// Largest q > 0 keeping (A-lam)*(A-lam) + eta^2 - t q T*T positive definite,
/// located by doubling plus bisection.
double probe_positivity_limit(const CMatrix& a, Complex lambda, double t,
                              const ProjectionObservable& obs);

}  // namespace evlab
