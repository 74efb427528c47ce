#include <doctest.h>

#include <cmath>

#include "evlab/dse.hpp"
#include "evlab/ensemble.hpp"
#include "evlab/errors.hpp"
#include "evlab/hermitization.hpp"
#include "evlab/spectral.hpp"

using namespace evlab;

TEST_CASE("hermitize on a scalar") {
  CMatrix a(1, 1);
  a(0, 0) = Complex(0.3, 0.4);
  const Complex z(0.1, 0.1);
  const SymSpectrum s = sym_spectrum(a, z);
  const double expected = std::abs(a(0, 0) - z);
  CHECK(s.xi(1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(s.xi(-1) == doctest::Approx(-expected).epsilon(1e-14));
}

TEST_CASE("sym_spectrum matches the SVD oracle and is chiral") {
  EnsembleSpec spec{Family::GinibreComplex, 64, 8, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const Complex z(0.2, -0.1);
  const SymSpectrum s = sym_spectrum(a, z);
  const int n = spec.dim;

  for (int k = 1; k <= n; ++k)
    CHECK(std::abs(s.xi(k) + s.xi(-k)) <= 1e-10);

  Eigen::BDCSVD<CMatrix> svd(a - z * CMatrix::Identity(n, n));
  RVector sv = svd.singularValues();  // descending
  for (int k = 1; k <= n; ++k)
    CHECK(std::abs(s.xi(k) - sv(n - k)) <= 1e-10);

  const CMatrix gram = s.vecs_all().adjoint() * s.vecs_all();
  CHECK((gram - CMatrix::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("resolvents of the zero matrix") {
  const CMatrix a = CMatrix::Zero(6, 6);
  const double eta = 0.3;
  const ResolventBundle b = resolvents(a, Complex(0, 0), eta);
  CHECK((b.h - CMatrix::Identity(6, 6) / (eta * eta)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((b.htilde - b.h).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("trace of H equals the spectral identity") {
  EnsembleSpec spec{Family::GinibreComplex, 48, 31, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const Complex z(0.3, 0.0);
  const double eta = 0.2;
  const ResolventBundle b = resolvents(a, z, eta);
  const SymSpectrum s = sym_spectrum(a, z);
  const double direct = trace_functionals(b).h;
  CHECK(direct == doctest::Approx(mean_h_from_xi(s.xi_positive(), eta)).epsilon(1e-10));
}

TEST_CASE("assembled G matches the dense inverse") {
  EnsembleSpec spec{Family::GinibreComplex, 64, 12, 0.0, false};
  const CMatrix a = sample_iid(spec, 1);
  const Complex z(0.25, 0.1);
  const double eta = 0.1;
  const ResolventBundle b = resolvents(a, z, eta);
  const int twon = 2 * spec.dim;
  const CMatrix direct =
      (hermitize(a, z) - Complex(0, eta) * CMatrix::Identity(twon, twon)).inverse();
  CHECK((b.g() - direct).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("tiny eta is rejected as ill conditioned") {
  EnsembleSpec spec{Family::GinibreComplex, 32, 2, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const SpectralSet set = eig_pairs(a);
  // at an exact eigenvalue the Gram matrix is singular up to eta^2
  CHECK_THROWS_AS(resolvents(a, set.triples[10].lambda, 1e-9), IllConditioned);
}

TEST_CASE("closed-form traces at A = 0") {
  const int n = 10;
  const CMatrix a = CMatrix::Zero(n, n);
  const double eta = 0.37;

  SUBCASE("z = 0") {
    const SingleShiftTraces t = trace_functionals(resolvents(a, Complex(0, 0), eta));
    CHECK(t.h == doctest::Approx(std::pow(eta, -2.0)).epsilon(1e-12));
    CHECK(t.h2 == doctest::Approx(std::pow(eta, -4.0)).epsilon(1e-12));
    CHECK(t.hht == doctest::Approx(std::pow(eta, -4.0)).epsilon(1e-12));
    CHECK(std::abs(t.h2az) < 1e-14);
  }
  SUBCASE("z = 1 gives the scalar value for <H^2(A-z)>") {
    const SingleShiftTraces t = trace_functionals(resolvents(a, Complex(1, 0), eta));
    const double expected = -std::pow(1.0 + eta * eta, -2.0);
    CHECK(t.h2az.real() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(t.h2az.imag()) < 1e-14);
  }
}

TEST_CASE("trace of H follows the deterministic equivalent over an eta grid") {
  // regression oracle: <H>(eta) ~ integral rho(x) / (x^2 + eta^2) dx, so the
  // measured log-log slope must match the deterministic-equivalent slope
  EnsembleSpec spec{Family::GinibreComplex, 128, 4, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const Complex z(0.3, 0.0);
  const double lo = std::pow(128.0, -1.0 / 3.0);
  const int pts = 8;
  RVector leta(pts), lval(pts), lref(pts);
  for (int i = 0; i < pts; ++i) {
    const double eta = lo * std::pow(1.0 / lo, static_cast<double>(i) / (pts - 1));
    leta(i) = std::log(eta);
    lval(i) = std::log(trace_functionals(resolvents(a, z, eta)).h);
    const double ref = adaptive_simpson(
        [&](double x) { return rho_z(z, x) / (x * x + eta * eta); }, -2.2, 2.2, 1e-10);
    lref(i) = std::log(ref);
    // bounds c/eta <= <H> <= C/eta with order-one constants
    const double scaled = std::exp(lval(i)) * eta;
    CHECK(scaled >= 0.3);
    CHECK(scaled <= 3.0);
  }
  auto slope = [&](const RVector& ly) {
    const double mx = leta.mean(), my = ly.mean();
    return ((leta.array() - mx) * (ly.array() - my)).sum() /
           (leta.array() - mx).square().sum();
  };
  CHECK(slope(lval) == doctest::Approx(slope(lref)).epsilon(0.02));
}

TEST_CASE("cross-shift traces obey trace cyclicity") {
  EnsembleSpec spec{Family::GinibreComplex, 32, 6, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const ResolventBundle b1 = resolvents(a, Complex(0, 0), 0.3);
  const ResolventBundle b2 = resolvents(a, Complex(0.5, 0), 0.4);
  const CrossShiftTraces t12 = cross_trace_functionals(b1, b2);
  // Tr[H1 Ht2] = Tr[Ht2 H1]
  const double swapped = (b2.htilde * b1.h).trace().real() / 32.0;
  CHECK(t12.hht == doctest::Approx(swapped).epsilon(1e-13));
  CHECK(t12.hh == doctest::Approx(cross_trace_functionals(b2, b1).hh).epsilon(1e-13));
}

TEST_CASE("v_functional") {
  SUBCASE("nonnegative and consistent on a deterministic matrix") {
    const int n = 16;
    const CMatrix a = CMatrix::Zero(n, n);
    auto obs = canonical_observable(n, RVector::Ones(1));
    const SymSpectrum s = sym_spectrum(a, Complex(5.0, 0.0));
    const VResult v = v_functional(s, obs, Side::Right, 0.1);
    CHECK(v.value >= 0.0);
    CHECK(v.trace_form == doctest::Approx(v.value).epsilon(1e-8));
  }
  SUBCASE("eigen-sum and trace forms agree on Ginibre") {
    EnsembleSpec spec{Family::GinibreComplex, 64, 13, 0.0, false};
    const CMatrix a = sample_iid(spec, 0);
    RVector w(2);
    w << 1.0, 0.5;
    const auto obs = canonical_observable(64, w);
    const VResult v = v_functional(a, Complex(0.1, 0.2), obs, Side::Right, 0.1);
    CHECK(v.value >= 0.0);
    CHECK(v.trace_form == doctest::Approx(v.value).epsilon(1e-8));
  }
  SUBCASE("at an eigenvalue V concentrates on the eigenvector statistic") {
    EnsembleSpec spec{Family::GinibreComplex, 256, 19, 0.0, false};
    const auto obs = canonical_observable(256, RVector::Ones(1));
    std::vector<double> gaps;
    for (int i = 0; i < 51; ++i) {
      const CMatrix a = sample_iid(spec, i);
      const SpectralSet set = eig_pairs(a);
      const auto picked = select_near(set, {Complex(0, 0)}, 0.1);
      const SymSpectrum s = sym_spectrum(a, picked[0].lambda);
      const VResult v = v_functional(s, obs, Side::Right, 0.1);
      double pair_sum = 0.0;
      for (int k : {-1, 1})
        pair_sum += 256.0 * std::norm(obs.vectors.col(0).dot(s.vec(k).segment(256, 256)));
      gaps.push_back(std::abs(v.value - pair_sum));
    }
    std::sort(gaps.begin(), gaps.end());
    const double median = gaps[gaps.size() / 2];
    // error scale N^{-delta_V/2}; measured desk value ~0.107 at this size
    CHECK(median <= std::pow(256.0, -0.05));
    CHECK(median <= 0.15);
  }
}
