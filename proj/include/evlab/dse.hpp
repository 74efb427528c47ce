#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "evlab/common.hpp"

namespace evlab {

/// Solution of the self-consistent equation at spectral parameter w, together
/// with the derived 2x2 deterministic equivalent
///   M = [[m, -z u], [-conj(z) u, m]],   u = m / (w + m).
/// m solves the equivalent cubic  m^3 + 2 w m^2 + (w^2 + 1 - |z|^2) m + w = 0
/// on the branch Im(m) Im(w) > 0 (Im(m) >= 0 on the real-w boundary).
struct DetEquivalent {
  Complex z;
  Complex w;
  Complex m;
  Complex u;
  Eigen::Matrix2cd big_m;

  /// |m^3 + 2wm^2 + (w^2+1-|z|^2)m + w| scaled back to the -1/m form.
  double residual() const;
};

DetEquivalent solve_mz(Complex z, Complex w);

/// Limiting symmetrized singular-value density: pi^{-1} |Im m_z(E + i0+)|.
/// Exactly zero outside the support (decided by the cubic discriminant).
double rho_z(Complex z, double e);

/// Positive support edge of rho_z (the density is supported on [-edge, edge]).
double support_edge(Complex z);

/// Density table plus quantiles gamma_j, |j| <= N, solving
/// (j + N) / (2N) = integral_{-inf}^{gamma_j} rho_z.
struct DensityProfile {
  Complex z;
  double edge = 0.0;
  RVector e_grid;
  RVector rho;
  RVector gamma_all;  // index 0..2N maps to j = -N..N; antisymmetric

  int n() const { return (static_cast<int>(gamma_all.size()) - 1) / 2; }
  double gamma(int j) const { return gamma_all(j + n()); }
};

DensityProfile quantiles(Complex z, int n, int grid_points = 2001);

/// {E : rho_z(E) >= kappa^{1/3}} as a union of closed intervals.
std::vector<std::pair<double, double>> kappa_bulk(Complex z, double kappa);

/// The scale eta solving t <H_z(eta)> = 1, by bisection on [1e-8, 1e2] using
/// strict monotonicity in eta, polished until |t<H> - 1| <= 1e-10.
double eta_zt(const RVector& xi_positive, double t);

class SymSpectrum;
double eta_zt(const SymSpectrum& spectrum, double t);

/// Adaptive Simpson integration (absolute tolerance), shared by the quantile
/// and mass computations.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 40);

}  // namespace evlab
