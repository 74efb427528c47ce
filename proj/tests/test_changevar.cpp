#include <doctest.h>

#include <cmath>

#include "evlab/changevar.hpp"
#include "evlab/divided_difference.hpp"
#include "evlab/dse.hpp"
#include "evlab/ensemble.hpp"
#include "evlab/errors.hpp"
#include "evlab/spectral.hpp"

using namespace evlab;

namespace {

CVector random_unit(int n, Stream& rng, bool fix_phase = false) {
  CVector u(n);
  for (int i = 0; i < n; ++i) u(i) = rng.normal_complex();
  u.normalize();
  if (fix_phase) u *= std::polar(1.0, -std::arg(u(0)));
  return u;
}

}  // namespace

TEST_CASE("householder basics") {
  Stream rng = derive_stream(101, 0);

  SUBCASE("degenerate reflector convention R(e1) = I") {
    CVector e1 = CVector::Zero(5);
    e1(0) = 1.0;
    CHECK((householder(e1) - CMatrix::Identity(5, 5)).norm() == 0.0);
  }
  SUBCASE("maps e1 to u when the first coordinate is real") {
    for (int rep = 0; rep < 10; ++rep) {
      const CVector u = random_unit(7, rng, true);
      const CMatrix r = householder(u);
      CVector e1 = CVector::Zero(7);
      e1(0) = 1.0;
      CHECK((r * e1 - u).norm() <= 1e-12);
    }
  }
  SUBCASE("unitary involution") {
    const CVector u = random_unit(6, rng);
    const CMatrix r = householder(u);
    CHECK((r * r.adjoint() - CMatrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((r * r - CMatrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("phi_forward single right step") {
  Stream rng = derive_stream(102, 0);
  DeflationChain chain = random_chain(4, 1, 0, rng);
  const CMatrix out = phi_forward(chain);

  // eigenvalues are {lambda} plus the residual spectrum
  Eigen::ComplexEigenSolver<CMatrix> es(out, false);
  double best = 1e300;
  for (int i = 0; i < 4; ++i)
    best = std::min(best, std::abs(es.eigenvalues()(i) - chain.steps[0].lambda));
  CHECK(best <= 1e-10);

  // R(u) e1 is the right eigenvector of the first step
  const CMatrix r = householder(chain.steps[0].sphere_point);
  CVector e1 = CVector::Zero(4);
  e1(0) = 1.0;
  const CVector vec = r * e1;
  CHECK(((out - chain.steps[0].lambda * CMatrix::Identity(4, 4)) * vec).norm() <= 1e-10);
}

TEST_CASE("phi_forward single left step has a left eigenvector") {
  Stream rng = derive_stream(103, 0);
  DeflationChain chain = random_chain(4, 0, 1, rng);
  const CMatrix out = phi_forward(chain);
  const CMatrix r = householder(chain.steps[0].sphere_point);
  CVector e1 = CVector::Zero(4);
  e1(0) = 1.0;
  const CVector vec = r * e1;
  CHECK(((out - chain.steps[0].lambda * CMatrix::Identity(4, 4)).adjoint() * vec).norm() <=
        1e-10);
}

TEST_CASE("deflate inverts phi_forward") {
  EnsembleSpec spec{Family::GinibreComplex, 8, 55, 0.0, false};
  const CMatrix a = sample_iid(spec, 0);
  const SpectralSet set = eig_pairs(a);
  const std::vector<Complex> lams = {set.triples[0].lambda, set.triples[3].lambda,
                                     set.triples[6].lambda};
  const std::vector<Side> sides = {Side::Right, Side::Right, Side::Left};
  const DeflationChain chain = deflate(a, lams, sides);
  CHECK((phi_forward(chain) - a).norm() <= 1e-9 * a.norm());

  SUBCASE("already-triangular input gives the identity reflector") {
    CMatrix tri(3, 3);
    tri << Complex(2, 0), Complex(1, 1), Complex(0, 3), 0, Complex(-1, 0), Complex(0.5, 0), 0,
        0, Complex(4, 0);
    const DeflationChain c = deflate(tri, {Complex(2, 0)}, {Side::Right});
    CHECK((c.steps[0].sphere_point - CVector::Unit(3, 0)).norm() <= 1e-12);
    CHECK((phi_forward(c) - tri).norm() <= 1e-10 * tri.norm());
  }
  SUBCASE("w equals the first-row tail of the conjugated matrix") {
    const CMatrix r = householder(chain.steps[0].sphere_point);
    const CMatrix b = r * a * r;
    CHECK((chain.steps[0].w.adjoint() - b.row(0).tail(7)).norm() <= 1e-10);
  }
  SUBCASE("reference matrix rides along") {
    EnsembleSpec spec2{Family::GinibreComplex, 8, 56, 0.0, false};
    const CMatrix ref = sample_iid(spec2, 0);
    const DeflationChain c = deflate(a, lams, sides, &ref);
    REQUIRE(c.reference_blocks.size() == 4);
    const CMatrix r = householder(c.steps[0].sphere_point);
    const CMatrix rb = r * ref * r;
    CHECK(std::abs(c.steps[0].a_diag - rb(0, 0)) <= 1e-12);
    CHECK((c.reference_blocks[1] - rb.block(1, 1, 7, 7)).norm() <= 1e-12);
  }
  SUBCASE("coincident requested eigenvalues are rejected") {
    CHECK_THROWS_AS(deflate(a, {lams[0], lams[0]}, {Side::Right, Side::Right}),
                    SeparationViolated);
  }
}

TEST_CASE("jacobian determinant matches the density formula") {
  Stream rng = derive_stream(104, 0);

  SUBCASE("N=2 single right step") {
    for (int rep = 0; rep < 3; ++rep) {
      const DeflationChain chain = random_chain(2, 1, 0, rng);
      const JacobianCheck jc = jacobian_fd_check(chain);
      CHECK(jc.formula_value ==
            doctest::Approx(std::norm(chain.steps[0].lambda - chain.residual(0, 0))));
      CHECK(jc.rel_error <= 1e-5);
    }
  }
  SUBCASE("N=3 right+left includes the cross Vandermonde") {
    for (int rep = 0; rep < 3; ++rep) {
      const DeflationChain chain = random_chain(3, 1, 1, rng);
      const JacobianCheck jc = jacobian_fd_check(chain);
      const double vdm = std::norm(chain.steps[0].lambda - chain.steps[1].lambda);
      const double dets = std::norm(chain.steps[0].lambda - chain.residual(0, 0)) *
                          std::norm(chain.steps[1].lambda - chain.residual(0, 0));
      CHECK(jc.formula_value == doctest::Approx(vdm * dets));
      CHECK(jc.rel_error <= 1e-4);
    }
  }
  SUBCASE("degenerate Vandermonde point collapses to zero") {
    DeflationChain chain = random_chain(3, 1, 1, rng);
    chain.steps[1].lambda = chain.steps[0].lambda;
    const JacobianCheck jc = jacobian_fd_check(chain);
    CHECK(jc.formula_value == 0.0);
    CHECK(jc.fd_value <= 1e-6);
  }
  SUBCASE("unfixed phases are rejected") {
    DeflationChain chain = random_chain(3, 1, 0, rng);
    chain.steps[0].sphere_point *= std::polar(1.0, 0.7);
    CHECK_THROWS(jacobian_fd_check(chain));
  }
}

TEST_CASE("evec_reconstruct transports eigenvectors through the chain") {
  Stream rng = derive_stream(105, 0);

  SUBCASE("w = 0 reduces to the padded reflection") {
    DeflationChain chain = random_chain(5, 1, 0, rng);
    chain.steps[0].w.setZero();
    const CVector x = random_unit(4, rng);
    const CVector lifted = evec_reconstruct(chain.steps[0], Complex(3, 1), x, Side::Right);
    CVector padded = CVector::Zero(5);
    padded.tail(4) = x;
    const CVector expected = (householder(chain.steps[0].sphere_point) * padded).normalized();
    CHECK((lifted - expected).norm() <= 1e-12);
  }
  SUBCASE("full chain matches direct eigenvectors at N=6") {
    EnsembleSpec spec{Family::GinibreComplex, 6, 57, 0.0, false};
    const CMatrix a = sample_iid(spec, 0);
    const SpectralSet set = eig_pairs(a);
    const std::vector<Complex> lams = {set.triples[0].lambda, set.triples[2].lambda};
    const DeflationChain chain = deflate(a, lams, {Side::Right, Side::Right});

    // pick an eigenpair of the residual M^{(2)} and transport it back
    Eigen::ComplexEigenSolver<CMatrix> es(chain.residual, true);
    const Complex lam = es.eigenvalues()(1);
    const CVector inner = es.eigenvectors().col(1).normalized();
    const CVector rebuilt = evec_reconstruct_chain(chain, 2, lam, inner, Side::Right);
    CHECK(((a - lam * CMatrix::Identity(6, 6)) * rebuilt).norm() <= 1e-9);

    // agrees with the directly computed eigenvector up to phase
    int best = 0;
    double bd = 1e300;
    for (int i = 0; i < 6; ++i) {
      const double d = std::abs(set.triples[i].lambda - lam);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    const CVector direct = set.triples[best].u;
    const Complex phase = direct.dot(rebuilt);
    CHECK((rebuilt - std::polar(1.0, std::arg(phase)) * direct).norm() <= 1e-8);
  }
  SUBCASE("left-step transport of a left eigenvector") {
    EnsembleSpec spec{Family::GinibreComplex, 5, 58, 0.0, false};
    const CMatrix a = sample_iid(spec, 0);
    const SpectralSet set = eig_pairs(a);
    const DeflationChain chain = deflate(a, {set.triples[0].lambda}, {Side::Left});
    Eigen::ComplexEigenSolver<CMatrix> es(chain.residual.adjoint(), true);
    const Complex lam = std::conj(es.eigenvalues()(0));
    const CVector inner = es.eigenvectors().col(0).normalized();
    const CVector rebuilt = evec_reconstruct(chain.steps[0], lam, inner, Side::Left);
    CHECK(((a - lam * CMatrix::Identity(5, 5)).adjoint() * rebuilt).norm() <= 1e-9);
  }
  SUBCASE("collision raises") {
    DeflationChain chain = random_chain(5, 1, 0, rng);
    const CVector x = random_unit(4, rng);
    CHECK_THROWS_AS(
        evec_reconstruct(chain.steps[0], chain.steps[0].lambda + Complex(1e-13, 0), x,
                         Side::Right),
        EigenvalueCollision);
  }
}

TEST_CASE("sphere_exp_integral") {
  SUBCASE("scalar case") {
    CMatrix b(1, 1);
    b(0, 0) = 0.7;
    CHECK(log_sphere_exp_integral(b) == doctest::Approx(-0.7).epsilon(1e-14));
  }
  SUBCASE("two distinct nodes match the 1-d integral") {
    const double b1 = 0.4, b2 = 2.1;
    CMatrix b = CMatrix::Zero(2, 2);
    b(0, 0) = b1;
    b(1, 1) = b2;
    const double expected = std::log((std::exp(-b2) - std::exp(-b1)) / (b1 - b2));
    CHECK(log_sphere_exp_integral(b) == doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("clustered nodes stay finite and accurate") {
    RVector e(3);
    e << 1.0, 1.0 + 1e-13, 1.0 - 1e-13;
    // all nodes equal: E = e^{-1}, log = -1
    CHECK(log_sphere_exp_integral_from_eigs(e) == doctest::Approx(-1.0).epsilon(1e-10));
  }
  SUBCASE("n=4 random Hermitian matches Monte Carlo within 3 SE") {
    Stream rng = derive_stream(106, 0);
    CMatrix g(4, 4);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) g(i, j) = rng.normal_complex();
    const CMatrix b = 0.5 * (g + g.adjoint());
    const double exact = std::exp(log_sphere_exp_integral(b));

    const int trials = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (int tcount = 0; tcount < trials; ++tcount) {
      CVector u(4);
      for (int i = 0; i < 4; ++i) u(i) = rng.normal_complex();
      u.normalize();
      const double v = std::exp(-(u.dot(b * u)).real());
      mean += v;
      m2 += v * v;
    }
    mean /= trials;
    m2 /= trials;
    const double se = std::sqrt((m2 - mean * mean) / trials);
    CHECK(std::abs(mean - exact) <= 3.0 * se);
  }
}

TEST_CASE("kq ratio check") {
  EnsembleSpec spec{Family::GinibreComplex, 16, 59, 0.0, false};
  const double t = 0.4;
  const auto obs = canonical_observable(16, RVector::Ones(1));
  Stream rng = derive_stream(spec.master_seed, 0);
  const CMatrix a = draw_iid(spec.family, 16, rng);
  const CMatrix mt = gaussian_divisible(a, t, false, rng);
  Eigen::ComplexEigenSolver<CMatrix> es(mt, false);
  int best = 0;
  double bd = 1e300;
  for (int k = 0; k < 16; ++k)
    if (std::abs(es.eigenvalues()(k)) < bd) {
      bd = std::abs(es.eigenvalues()(k));
      best = k;
    }
  const Complex lam = es.eigenvalues()(best);

  SUBCASE("q = 0 gives an exactly zero gap") {
    const KqRatio r = kq_ratio_check(a, lam, t, 0.0, obs);
    CHECK(r.log_ratio == 0.0);
    CHECK(r.log_det == doctest::Approx(0.0));
    CHECK(r.gap == doctest::Approx(0.0));
  }
  SUBCASE("rank one determinant identity") {
    const KqRatio r = kq_ratio_check(a, lam, t, -1.0, obs);
    const CMatrix shifted = a - lam * CMatrix::Identity(16, 16);
    const CMatrix k = shifted.adjoint() * shifted + r.eta * r.eta * CMatrix::Identity(16, 16);
    const CVector w = obs.vectors.col(0);
    const Complex whw = w.dot(k.llt().solve(w));
    CHECK(r.log_det == doctest::Approx(-std::log(std::abs(1.0 + t * whw.real()))).epsilon(1e-10));
  }
  SUBCASE("positive q beyond the window trips PositivityLost") {
    const double qt = probe_positivity_limit(a, lam, t, obs);
    CHECK(qt > 0.0);
    CHECK_NOTHROW(kq_ratio_check(a, lam, t, qt / 4.0, obs));
    CHECK_THROWS_AS(kq_ratio_check(a, lam, t, 4.0 * qt, obs), PositivityLost);
  }
}
