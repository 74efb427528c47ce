#include <doctest.h>

#include <cmath>

#include "evlab/dse.hpp"
#include "evlab/ensemble.hpp"
#include "evlab/errors.hpp"
#include "evlab/hermitization.hpp"

using namespace evlab;

TEST_CASE("m at z=0, w=i is the golden-ratio point") {
  const DetEquivalent d = solve_mz(Complex(0, 0), Complex(0, 1));
  const double expected = (std::sqrt(5.0) - 1.0) / 2.0;
  CHECK(std::abs(d.m - Complex(0.0, expected)) < 1e-12);
  CHECK(d.residual() <= 1e-12);
}

TEST_CASE("z=0 boundary density is the semicircle") {
  for (double e : {-1.9, -1.2, -0.5, 0.0, 0.4, 1.1, 1.7, 1.95}) {
    const double semicircle = std::sqrt(4.0 - e * e) / (2.0 * kPi);
    CHECK(rho_z(Complex(0, 0), e) == doctest::Approx(semicircle).epsilon(1e-10));
  }
}

TEST_CASE("boundary value at w -> i0+ is sqrt(1-|z|^2)") {
  for (double r : {0.0, 0.3, 0.6, 0.855}) {
    const DetEquivalent d = solve_mz(Complex(r, 0.0), Complex(0.0, 0.0));
    CHECK(std::abs(d.m.imag() - std::sqrt(1.0 - r * r)) <= 1e-8);
    CHECK(rho_z(Complex(r, 0.0), 0.0) ==
          doctest::Approx(std::sqrt(1.0 - r * r) / kPi).epsilon(1e-10));
  }
}

TEST_CASE("density vanishes identically outside the support") {
  CHECK(rho_z(Complex(0, 0), 5.0) == 0.0);
  CHECK(rho_z(Complex(0, 0), -5.0) == 0.0);
  CHECK(rho_z(Complex(0.6, 0.0), 4.5) == 0.0);
}

TEST_CASE("cubic residual is tiny on a (z, w) grid") {
  double worst = 0.0;
  for (int zi = 0; zi < 10; ++zi)
    for (int wi = 0; wi < 100; ++wi) {
      const Complex z(0.09 * zi, 0.05 * (zi % 3));
      const Complex w(-2.5 + 0.05 * wi, 0.02 + 0.01 * (wi % 7));
      worst = std::max(worst, solve_mz(z, w).residual());
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("per-point branch selection agrees with continuity tracking") {
  // walk the support on a 1e-3 grid carrying the root by nearest-neighbor
  // continuation; the independent per-point selection must stay on it
  const Complex z(0.3, 0.1);
  const double edge = support_edge(z);
  Complex tracked = solve_mz(z, Complex(-edge + 1e-3, 0.0)).m;
  double de = 1e-3;
  double worst = 0.0;
  for (double e = -edge + 2 * de; e < edge - de; e += de) {
    const DetEquivalent direct = solve_mz(z, Complex(e, 0.0));
    // continuity step: Newton from the previous root onto the new cubic
    Complex m = tracked;
    for (int it = 0; it < 50; ++it) {
      const Complex p = ((m + 2.0 * e) * m + (e * e + 1.0 - std::norm(z))) * m + e;
      const Complex dp = (3.0 * m + 4.0 * e) * m + (e * e + 1.0 - std::norm(z));
      if (std::abs(dp) < 1e-300) break;
      const Complex step = p / dp;
      m -= step;
      if (std::abs(step) < 1e-15) break;
    }
    if (m.imag() < 0.0) m = std::conj(m);
    tracked = m;
    worst = std::max(worst, std::abs(direct.m - tracked));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("quantiles") {
  SUBCASE("j = 0 sits at the symmetry point") {
    const DensityProfile p = quantiles(Complex(0.2, 0.1), 8);
    CHECK(p.gamma(0) == 0.0);
  }
  SUBCASE("z = 0, N = 2, j = 1 matches the semicircle inversion oracle") {
    // independent oracle: closed-form semicircle CDF, bisected
    auto cdf0 = [](double g) {
      return (g * std::sqrt(4.0 - g * g) / 2.0 + 2.0 * std::asin(g / 2.0)) / (2.0 * kPi);
    };
    double lo = 0.0, hi = 2.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf0(mid) < 0.25 ? lo : hi) = mid;
    }
    const double oracle = 0.5 * (lo + hi);
    CHECK(oracle == doctest::Approx(0.8079).epsilon(2e-4));
    const DensityProfile p = quantiles(Complex(0, 0), 2);
    CHECK(p.gamma(1) == doctest::Approx(oracle).epsilon(1e-8));
  }
  SUBCASE("strictly increasing and antisymmetric") {
    const int n = 24;
    const DensityProfile p = quantiles(Complex(0.3, 0.1), n);
    for (int j = -n; j < n; ++j) CHECK(p.gamma(j + 1) > p.gamma(j));
    for (int j = 1; j <= n; ++j) CHECK(p.gamma(-j) == -p.gamma(j));
  }
  SUBCASE("density grid is symmetric with unit mass") {
    const DensityProfile p = quantiles(Complex(0.4, 0.0), 8);
    const int g = static_cast<int>(p.e_grid.size());
    for (int i = 0; i < g; ++i)
      CHECK(p.rho(i) == doctest::Approx(p.rho(g - 1 - i)).epsilon(1e-10));
  }
}

TEST_CASE("kappa bulk") {
  SUBCASE("oversized threshold gives the empty set") {
    CHECK(kappa_bulk(Complex(0, 0), 64.0).empty());  // 64^{1/3} = 4 > max rho
  }
  SUBCASE("z = 0 bulk contains the origin") {
    const auto b = kappa_bulk(Complex(0, 0), 1e-3);
    REQUIRE(!b.empty());
    bool contains = false;
    for (const auto& [lo, hi] : b) contains = contains || (lo <= 0.0 && 0.0 <= hi);
    CHECK(contains);
  }
  SUBCASE("endpoints solve rho = kappa^(1/3)") {
    const double kappa = 1e-3;
    const auto b = kappa_bulk(Complex(0.2, 0.0), kappa);
    REQUIRE(!b.empty());
    const double level = std::cbrt(kappa);
    for (const auto& [lo, hi] : b) {
      if (lo > -support_edge(Complex(0.2, 0.0)) + 1e-9)
        CHECK(rho_z(Complex(0.2, 0.0), lo) == doctest::Approx(level).epsilon(1e-8));
      if (hi < support_edge(Complex(0.2, 0.0)) - 1e-9)
        CHECK(rho_z(Complex(0.2, 0.0), hi) == doctest::Approx(level).epsilon(1e-8));
    }
  }
}

TEST_CASE("eta_zt") {
  SUBCASE("closed form at A = 0, z = 0") {
    const RVector xi = RVector::Zero(32);
    for (double t : {0.01, 0.25, 1.0, 4.0}) {
      const double eta = eta_zt(xi, t);
      CHECK(eta == doctest::Approx(std::sqrt(t)).epsilon(1e-10));
      CHECK(std::abs(t * mean_h_from_xi(xi, eta) - 1.0) <= 1e-10);
    }
  }
  SUBCASE("Ginibre at t = N^(-1/3) lands within a factor 10 of t") {
    EnsembleSpec spec{Family::GinibreComplex, 256, 67, 0.0, false};
    const CMatrix a = sample_iid(spec, 0);
    const SymSpectrum s = sym_spectrum(a, Complex(0, 0));
    const double t = std::pow(256.0, -1.0 / 3.0);
    const double eta = eta_zt(s, t);
    CHECK(eta >= t / 10.0);
    CHECK(eta <= t * 10.0);
    CHECK(std::abs(t * mean_h_from_xi(s.xi_positive(), eta) - 1.0) <= 1e-10);
  }
  SUBCASE("t outside the bracket fails loudly") {
    RVector xi = RVector::Ones(8);  // <H> <= 1, so t <H> = 1 needs t >= 1
    CHECK_THROWS_AS(eta_zt(xi, 1e-6), BracketFailure);
  }
}
