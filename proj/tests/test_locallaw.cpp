#include <doctest.h>

#include <cmath>

#include "evlab/ensemble.hpp"
#include "evlab/errors.hpp"
#include "evlab/locallaw.hpp"

using namespace evlab;

namespace {

RVector geom_grid(double lo, double hi, int pts) {
  RVector g(pts);
  for (int i = 0; i < pts; ++i)
    g(i) = lo * std::pow(hi / lo, static_cast<double>(i) / (pts - 1));
  return g;
}

}  // namespace

TEST_CASE("slope fit recovers exact closed-form exponents at A = 0") {
  // A = 0, z = 0: <H> = eta^-2, <H Ht> = eta^-4, <H^2> = eta^-4; the fitting
  // pipeline must reproduce these exactly, independent of any randomness
  const CMatrix a = CMatrix::Zero(12, 12);
  const auto reports = check_a1(a, Complex(0, 0), geom_grid(0.2, 1.0, 9));
  REQUIRE(reports.size() == 5);
  CHECK(reports[0].slope == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(reports[1].slope == doctest::Approx(-4.0).epsilon(1e-10));
  CHECK(reports[2].slope == doctest::Approx(-4.0).epsilon(1e-10));
  CHECK(reports[0].r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("A1 reports on a Ginibre sample") {
  EnsembleSpec spec{Family::GinibreComplex, 256, 41, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const double lo = std::pow(256.0, -1.0 / 3.0);
  const auto reports = check_a1(a, Complex(0.3, 0.0), geom_grid(lo, 1.0, 12));

  SUBCASE("two-sided bounds hold with order-one constants") {
    CHECK(reports[0].c_const >= 0.3);   // eta <H> from below
    CHECK(reports[0].big_c_const <= 3.0);
    CHECK(reports[0].slope == doctest::Approx(-1.2).epsilon(0.05));  // crossover-exact value
  }
  SUBCASE("block-trace combinations stay bounded by 10") {
    CHECK(reports[4].quantity == "trace_gb1gb2");
    CHECK(reports[4].big_c_const <= 10.0);
    CHECK(reports[4].pass);
  }
  SUBCASE("|<H^2(A-z)>| eta stays bounded") {
    CHECK(reports[3].big_c_const <= 10.0);
    CHECK(reports[3].pass);
  }
}

TEST_CASE("A2 lower-bound constants") {
  EnsembleSpec spec{Family::GinibreComplex, 256, 43, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);

  SUBCASE("degenerate case reduces to the single-shift trace") {
    const double eta = 0.1;
    const ScalingReport r = check_a2(a, Complex(0, 0), Complex(0, 0), eta, eta);
    const double hht = trace_functionals(resolvents(a, Complex(0, 0), eta)).hht;
    CHECK(r.values(2) == doctest::Approx(eta * eta * hht).epsilon(1e-12));
    CHECK(r.c_const > 0.0);
  }
  SUBCASE("separated shifts keep an admissible constant") {
    const ScalingReport r = check_a2(a, Complex(0, 0), Complex(0.5, 0), 0.1, 0.1);
    CHECK(r.c_const > 0.0);
    // the recorded baseline from the first frozen run
    CHECK(r.values(2) >= 0.01);
  }
}

TEST_CASE("A3 isotropic deviations") {
  SUBCASE("deterministic A = 0 has exactly zero deviation") {
    const CMatrix a = CMatrix::Zero(24, 24);
    const auto obs = canonical_observable(24, RVector::Ones(2));
    const auto reports = check_a3_isotropic(a, Complex(0, 0), 0.3, obs);
    CHECK(reports[0].big_c_const <= 1e-12);
    CHECK(reports[1].big_c_const <= 1e-12);
  }
  SUBCASE("Ginibre at eta = N^(-1/3) stays under C = 10") {
    EnsembleSpec spec{Family::GinibreComplex, 256, 47, 0.0, false};
    const CMatrix a = sample_iid(spec, 0);
    RVector w(2);
    w << 1.0, 0.5;
    const auto obs = canonical_observable(256, w);
    const auto reports =
        check_a3_isotropic(a, Complex(0.3, 0.0), std::pow(256.0, -1.0 / 3.0), obs);
    for (const auto& r : reports) {
      CHECK(r.big_c_const <= 10.0);
      CHECK(r.pass);
    }
  }
}

TEST_CASE("rigidity and delocalization") {
  SUBCASE("deterministic spectrum is flagged, not scored") {
    const CMatrix a = CMatrix::Zero(16, 16);
    const DensityProfile profile = quantiles(Complex(0.5, 0.0), 16);
    const RigidityReport r = rigidity_deloc(sym_spectrum(a, Complex(0.5, 0.0)), profile, 1e-3);
    CHECK(r.degenerate);
  }
  SUBCASE("Ginibre sample at N = 128 passes the polylog envelopes") {
    EnsembleSpec spec{Family::GinibreComplex, 128, 51, 0.0, false};
    const Complex z(0.3, 0.1);
    const DensityProfile profile = quantiles(z, 128);
    const RigidityReport r =
        rigidity_deloc(sym_spectrum(sample_iid(spec, 0), z), profile, 1e-3);
    CHECK(!r.degenerate);
    CHECK(r.n_bulk > 32);
    CHECK(r.pass_rigidity);
    CHECK(r.pass_deloc);
  }
}

TEST_CASE("eigenstate thermalization check") {
  EnsembleSpec spec{Family::GinibreComplex, 128, 53, 0.0, false};
  const Complex z(0.2, 0.0);
  const DensityProfile profile = quantiles(z, 128);
  const SymSpectrum s = sym_spectrum(sample_iid(spec, 0), z);

  SUBCASE("zero observable gives zero") {
    const CMatrix y = CMatrix::Zero(256, 256);
    const EthReport r = eth_check(s, profile, y, 1e-3);
    CHECK(r.offdiag_max == 0.0);
    CHECK(r.diag_max == 0.0);
  }
  SUBCASE("F12-type observable concentrates") {
    CMatrix y = CMatrix::Zero(256, 256);
    y.block(0, 128, 128, 128) = CMatrix::Identity(128, 128);
    const EthReport r = eth_check(s, profile, y, 1e-3);
    CHECK(r.offdiag_max <= r.threshold);
    CHECK(r.diag_max <= r.threshold);
    CHECK(r.pass);
  }
  SUBCASE("block-traceful observables are rejected") {
    const CMatrix y = CMatrix::Identity(256, 256);
    CHECK_THROWS_AS(eth_check(s, profile, y, 1e-3), std::invalid_argument);
  }
}

TEST_CASE("level repulsion frequencies are monotone and bounded") {
  EnsembleSpec spec{Family::GinibreComplex, 64, 61, 0.0, false};
  const LevelRepulsionReport rep =
      level_repulsion(spec, Complex(0, 0), {0.05, 0.1, 0.2}, 300, 4);
  REQUIRE(rep.points.size() == 3);
  CHECK(rep.points[0].frequency >= rep.points[1].frequency);
  CHECK(rep.points[1].frequency >= rep.points[2].frequency);
  for (const auto& p : rep.points) CHECK(p.pass);

  SUBCASE("sub-resolution cutoff has zero frequency") {
    // N^{-1-delta} far below any reachable gap at this size
    const LevelRepulsionReport tiny =
        level_repulsion(spec, Complex(0, 0), {3.0}, 50, 2);
    CHECK(tiny.points[0].frequency == 0.0);
  }
}

TEST_CASE("gradient scaling") {
  SUBCASE("closed form at A = 0 with T = I") {
    const int n = 16;
    const CMatrix a = CMatrix::Zero(n, n);
    const CMatrix t2n = CMatrix::Identity(2 * n, 2 * n);
    const double eta = 0.5 / n;
    const double x = 0.3;
    const GradScalingReport r = grad_scaling(a, Complex(x, 0.0), t2n, eta);
    // Tr G = 2iN eta / (|z|^2 + eta^2), so d/dx = -4iN eta x / (|z|^2 + eta^2)^2
    const double denom = x * x + eta * eta;
    const double expected = 4.0 * n * eta * x / (denom * denom);
    CHECK(r.grad_norm == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("Ginibre ratio stays within the polylog envelope") {
    EnsembleSpec spec{Family::GinibreComplex, 128, 63, 0.0, false};
    const CMatrix a = sample_iid(spec, 0);
    const int n = 128;
    CMatrix t2n = CMatrix::Zero(2 * n, 2 * n);
    t2n(0, n) = 1.0;  // E12-type rank-one block observable
    t2n(n, 0) = 1.0;
    const double eta = std::pow(static_cast<double>(n), -1.1);
    const GradScalingReport r = grad_scaling(a, Complex(0.2, 0.1), t2n, eta);
    CHECK(r.grad_ratio <= std::log(static_cast<double>(n)));
    CHECK(r.hess_ratio <= std::pow(std::log(static_cast<double>(n)), 2.0));
  }
}
