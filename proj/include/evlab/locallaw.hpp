#pragma once

#include <string>
#include <vector>

#include "evlab/common.hpp"
#include "evlab/dse.hpp"
#include "evlab/ensemble.hpp"
#include "evlab/hermitization.hpp"
#include "evlab/spectral.hpp"

namespace evlab {

/// Measured values over a grid together with a log-log power-law fit and the
/// per-point constants c = min(value * x^{-target}), C = max(...). For pure
/// boundedness checks target_slope is NaN and only C is meaningful.
struct ScalingReport {
  std::string quantity;
  RVector grid;
  RVector values;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double target_slope = 0.0;
  double slope_tol = 0.15;
  double c_const = 0.0;
  double big_c_const = 0.0;
  bool pass = false;
};

/// Least-squares fit of log|y| against log x.
void fit_loglog(ScalingReport& r);

/// Re-fit a report whose values are the pointwise mean of several reports.
ScalingReport merge_scaling_reports(const std::vector<ScalingReport>& reports);

/// Trace scaling over an eta grid: <H> ~ eta^-1, <H Ht> ~ eta^-2, <H^2> ~
/// eta^-3, |<H^2 (A-z)>| <= C/eta, |<G B1 G B2>| <= C.
std::vector<ScalingReport> check_a1(const CMatrix& a, Complex z, const RVector& eta_grid,
                                    double slope_tol = 0.15, double c_max = 10.0);

/// Two-shift lower bounds; values are the admissible constants
///   c1 = <H_{z1}H_{z2}> (eta*)^2, c2 = <Ht Ht> (eta*)^2,
///   c3 = <H_{z1}Ht_{z2}> eta* (eta* + |z1-z2|^2),
/// reported with c_const = min of the three.
ScalingReport check_a2(const CMatrix& a, Complex z1, Complex z2, double eta1, double eta2);

/// Isotropic deviations |w1* H w2 - <H> w1* w2| * sqrt(N) eta^{3/2} over the
/// combination set {w_k1, w_k1 +- w_k2, w_k1 +- i w_k2}; one report for H and
/// one for Ht, values are all pair deviations, C = max.
std::vector<ScalingReport> check_a3_isotropic(const CMatrix& a, Complex z, double eta,
                                              const ProjectionObservable& obs,
                                              double c_max = 10.0);

struct RigidityReport {
  double max_rigidity = 0.0;   // max over bulk k of N |xi_k - gamma_k|
  double max_deloc = 0.0;      // max over bulk k of sqrt(N) ||u_k||_inf
  double rigidity_threshold = 0.0;  // log^2 N
  double deloc_threshold = 0.0;     // log N
  int n_bulk = 0;
  bool degenerate = false;  // deterministic spectrum, check skipped
  bool pass_rigidity = false;
  bool pass_deloc = false;
};

RigidityReport rigidity_deloc(const SymSpectrum& s, const DensityProfile& profile, double kappa);

struct EthReport {
  double offdiag_max = 0.0;  // sqrt(N) max_{|i| != |j|} |u_i* Y u_j|
  double diag_max = 0.0;     // sqrt(N) max_{|i| == |j|} (|u_i* Y u_j| - |i|/N)+
  double threshold = 0.0;    // log N
  int n_bulk = 0;
  bool pass = false;
};

/// Requires <Y E11> = <Y E22> = 0 (block-traceless observable).
EthReport eth_check(const SymSpectrum& s, const DensityProfile& profile, const CMatrix& y,
                    double kappa);

struct LevelRepulsionPoint {
  double delta = 0.0;
  double cutoff = 0.0;     // N^{-1-delta}
  double frequency = 0.0;  // empirical P(xi_2 <= cutoff)
  double bound = 0.0;      // N^{-2.1 delta}
  double standard_error = 0.0;
  bool pass = false;
};

struct LevelRepulsionReport {
  std::vector<LevelRepulsionPoint> points;
  int n_samples = 0;
  bool pass = false;
};

/// Shared xi_2 samples across all deltas, so frequencies are monotone by
/// construction. Sampling is parallel over indices with per-index streams.
LevelRepulsionReport level_repulsion(const EnsembleSpec& spec, Complex z,
                                     const std::vector<double>& deltas, int n_samples,
                                     int threads = 0);

struct GradScalingReport {
  double grad_norm = 0.0;      // sqrt(|d/dx|^2 + |d/dy|^2) of Tr T G_z(eta)
  double hess_norm = 0.0;      // Frobenius-style norm of the second partials
  double grad_bound = 0.0;     // N^{-3/2} eta^{-2} Tr sqrt(T*T)
  double hess_bound = 0.0;     // N^{-2} eta^{-3} Tr sqrt(T*T)
  double grad_ratio = 0.0;
  double hess_ratio = 0.0;
  double step = 0.0;
};

/// Central finite differences of z -> Tr[T G_z(eta)] via the eigendecomposition
/// (T Hermitian on the 2N space). Step h = 1e-6 N^{-1/2}; throws FDInstability
/// when h and h/2 disagree by more than 10%.
GradScalingReport grad_scaling(const CMatrix& a, Complex z, const CMatrix& t_2n, double eta);

}  // namespace evlab
