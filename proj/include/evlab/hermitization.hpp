#pragma once

#include "evlab/common.hpp"
#include "evlab/spectral.hpp"

namespace evlab {

/// [[0, A-z], [(A-z)*, 0]]; Hermitian by construction, spectrum symmetric
/// about 0 with the positive half equal to the singular values of A-z.
CMatrix hermitize(const CMatrix& a, Complex z);

/// Eigendata of the Hermitization with the symmetric indexing convention
/// k in [-N,-1] u [1,N]: xi_k >= 0 for k >= 1, xi_{-k} = -xi_k, nondecreasing.
class SymSpectrum {
 public:
  SymSpectrum(Complex z, RVector xi_ascending, CMatrix vecs);

  Complex z() const { return z_; }
  int n() const { return n_; }

  /// Eigenvalue by signed index k (|k| in [1, N], k != 0).
  double xi(int k) const { return xi_[flat(k)]; }
  /// Eigenvector by signed index.
  Eigen::Ref<const CVector> vec(int k) const { return vecs_.col(flat(k)); }

  /// All 2N eigenvalues ascending (index 0..2N-1 maps to k = -N..-1, 1..N).
  const RVector& xi_all() const { return xi_; }
  const CMatrix& vecs_all() const { return vecs_; }

  /// Positive half xi_1 <= ... <= xi_N (the singular values of A - z).
  RVector xi_positive() const { return xi_.tail(n_); }

  static int flat_index(int k, int n) { return k < 0 ? k + n : n + k - 1; }

 private:
  int flat(int k) const { return flat_index(k, n_); }
  Complex z_;
  int n_;
  RVector xi_;
  CMatrix vecs_;
};

SymSpectrum sym_spectrum(const CMatrix& a, Complex z);

/// <H_z(eta)> = N^{-1} sum_{k>=1} (xi_k^2 + eta^2)^{-1}, from the positive half
/// of the symmetrized spectrum.
double mean_h_from_xi(const RVector& xi_positive, double eta);

/// Resolvent blocks at spectral parameter i*eta:
///   H    = [(A-z)*(A-z) + eta^2]^{-1}
///   Ht   = [(A-z)(A-z)* + eta^2]^{-1}
///   G    = (Hermitization - i eta)^{-1}, assembled blockwise as
///          [[i eta Ht, Ht(A-z)], [(A-z)* Ht, i eta H]].
struct ResolventBundle {
  Complex z;
  double eta = 0.0;
  CMatrix shifted;  // A - z
  CMatrix h;        // Hermitian positive definite
  CMatrix htilde;   // Hermitian positive definite

  int n() const { return static_cast<int>(h.rows()); }
  CMatrix g() const;  // 2N x 2N
};

/// Hermitian solves for both blocks. Throws IllConditioned when the one-norm
/// condition estimate of (A-z)*(A-z) + eta^2 exceeds 1e14.
ResolventBundle resolvents(const CMatrix& a, Complex z, double eta);

/// Normalized traces: <X> = Tr X / N for N x N blocks; G-expressions are
/// divided by 2N (the Hermitization-space convention). Both conventions are
/// fixed here and nowhere else.
struct SingleShiftTraces {
  double eta = 0.0;
  double h = 0.0;         // <H>
  double hht = 0.0;       // <H Htilde>
  double h2 = 0.0;        // <H^2>
  Complex h2az;           // <H^2 (A-z)>
  Complex g12_21;         // <G E12 G E21>, 2N-normalized
  Complex g21_12;         // <G E21 G E12>
  Complex g12_12;         // <G E12 G E12>
  Complex g21_21;         // <G E21 G E21>
};

SingleShiftTraces trace_functionals(const ResolventBundle& b);

struct CrossShiftTraces {
  double hh = 0.0;    // <H_{z1}(eta1) H_{z2}(eta2)>
  double htht = 0.0;  // <Ht_{z1} Ht_{z2}>
  double hht = 0.0;   // <H_{z1} Ht_{z2}>
};

CrossShiftTraces cross_trace_functionals(const ResolventBundle& b1, const ResolventBundle& b2);

/// Two-resolvent trace <G_{z}(eta1) B1 G_{z}(eta2) B2> / 2N with B1, B2 in
/// {E12, E21} given as flags (true = E12).
Complex two_eta_g_trace(const ResolventBundle& b1, const ResolventBundle& b2, bool b1_is_e12,
                        bool b2_is_e12);

/// V(z,T) = N eta_V Tr[T*T Im G_z(eta_V)] with eta_V = N^{-1-delta_V} and T
/// embedded on the Hermitization space so that it picks out the right- (lower)
/// or left- (upper) vector half. Routed through the eigendecomposition; the
/// trace form and the eigenvalue-sum form are both computed and must agree to
/// 1e-8 relative.
struct VResult {
  double value = 0.0;       // canonical (eigen-sum) value
  double trace_form = 0.0;  // same quantity through the assembled Im G
  double eta_v = 0.0;
};

VResult v_functional(const SymSpectrum& s, const ProjectionObservable& t, Side side,
                     double delta_v);
VResult v_functional(const CMatrix& a, Complex z, const ProjectionObservable& t, Side side,
                     double delta_v);

}  // namespace evlab
