#include "evlab/changevar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evlab/divided_difference.hpp"
#include "evlab/dse.hpp"
#include "evlab/errors.hpp"

namespace evlab {

CMatrix householder(const CVector& u) {
  const int n = static_cast<int>(u.size());
  CVector d = -u;
  d(0) += 1.0;  // e1 - u
  const double nd2 = d.squaredNorm();
  if (nd2 < 1e-28) return CMatrix::Identity(n, n);
  CMatrix r = CMatrix::Identity(n, n);
  r.noalias() -= (2.0 / nd2) * (d * d.adjoint());
  return r;
}

namespace {

CVector phase_fixed(const CVector& u) {
  const Complex u1 = u(0);
  if (u1 == Complex(0.0, 0.0)) return u;
  return u * std::polar(1.0, -std::arg(u1));
}

CMatrix wrap_step(const DeflationStep& s, const CMatrix& inner) {
  const int n = static_cast<int>(inner.rows()) + 1;
  if (s.sphere_point.size() != n || s.w.size() != n - 1)
    throw DimensionMismatch("phi_forward: step dimensions do not telescope");
  CMatrix b = CMatrix::Zero(n, n);
  b(0, 0) = s.lambda;
  if (s.side == Side::Right)
    b.block(0, 1, 1, n - 1) = s.w.adjoint();
  else
    b.block(1, 0, n - 1, 1) = s.w;
  b.block(1, 1, n - 1, n - 1) = inner;
  const CMatrix r = householder(s.sphere_point);
  return r * b * r;
}

}  // namespace

CMatrix phi_forward(const DeflationChain& chain) {
  CMatrix m = chain.residual;
  for (auto it = chain.steps.rbegin(); it != chain.steps.rend(); ++it) m = wrap_step(*it, m);
  return m;
}

DeflationChain deflate(const CMatrix& a, const std::vector<Complex>& selected,
                       const std::vector<Side>& sides, const CMatrix* reference) {
  if (selected.size() != sides.size())
    throw DimensionMismatch("deflate: one eigenvalue per side required");
  for (std::size_t i = 0; i < selected.size(); ++i)
    for (std::size_t j = i + 1; j < selected.size(); ++j)
      if (std::abs(selected[i] - selected[j]) < 1e-12)
        throw SeparationViolated("deflate: selected eigenvalues must be distinct");

  DeflationChain chain;
  CMatrix cur = a;
  CMatrix ref;
  if (reference) {
    if (reference->rows() != a.rows() || reference->cols() != a.cols())
      throw DimensionMismatch("deflate: reference dimension mismatch");
    ref = *reference;
    chain.reference_blocks.push_back(ref);
  }
  const double scale = std::max(1.0, a.norm());

  for (std::size_t j = 0; j < selected.size(); ++j) {
    const int n = static_cast<int>(cur.rows());
    const Side side = sides[j];
    const CMatrix target = side == Side::Right ? cur : CMatrix(cur.adjoint());
    Eigen::ComplexEigenSolver<CMatrix> es(target, true);
    if (es.info() != Eigen::Success) throw Error("deflate: eigensolver did not converge");
    const Complex want = side == Side::Right ? selected[j] : std::conj(selected[j]);
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      const double d = std::abs(es.eigenvalues()(k) - want);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    const Complex lambda =
        side == Side::Right ? es.eigenvalues()(best) : std::conj(es.eigenvalues()(best));
    const CVector s = phase_fixed(es.eigenvectors().col(best).normalized());
    const CMatrix r = householder(s);
    const CMatrix b = r * cur * r;

    DeflationStep step;
    step.side = side;
    step.lambda = lambda;
    step.sphere_point = s;
    if (side == Side::Right) {
      if (b.col(0).tail(n - 1).norm() > 1e-8 * scale)
        throw DefectivePair("deflate: first column did not deflate");
      step.w = b.row(0).tail(n - 1).adjoint();  // store w, so that the row is w*
    } else {
      if (b.row(0).tail(n - 1).norm() > 1e-8 * scale)
        throw DefectivePair("deflate: first row did not deflate");
      step.w = b.col(0).tail(n - 1);
    }
    cur = b.block(1, 1, n - 1, n - 1);

    if (reference) {
      const CMatrix rb = r * ref * r;
      step.a_diag = rb(0, 0);
      step.offblock = side == Side::Right ? CVector(rb.row(0).tail(n - 1).adjoint())
                                          : CVector(rb.col(0).tail(n - 1));
      step.has_reference = true;
      ref = rb.block(1, 1, n - 1, n - 1);
      chain.reference_blocks.push_back(ref);
    }
    chain.steps.push_back(std::move(step));
  }
  chain.residual = cur;
  return chain;
}

DeflationChain random_chain(int n, int m_right, int m_left, Stream& rng) {
  DeflationChain chain;
  const int m = m_right + m_left;
  if (m >= n) throw DimensionMismatch("random_chain: need m < n");
  for (int j = 0; j < m; ++j) {
    DeflationStep s;
    s.side = j < m_right ? Side::Right : Side::Left;
    s.lambda = rng.normal_complex();
    CVector u(n - j);
    for (int i = 0; i < n - j; ++i) u(i) = rng.normal_complex();
    s.sphere_point = phase_fixed(u.normalized());
    s.w = CVector(n - j - 1);
    for (int i = 0; i < n - j - 1; ++i) s.w(i) = rng.normal_complex();
    chain.steps.push_back(std::move(s));
  }
  chain.residual = CMatrix(n - m, n - m);
  for (int c = 0; c < n - m; ++c)
    for (int r = 0; r < n - m; ++r) chain.residual(r, c) = rng.normal_complex();
  return chain;
}

namespace {

// Real-orthonormal basis of {h : Re<u,h> = 0, Im h_1 = 0}, the tangent space
// of the phase-fixed sphere chart (dim 2n-2). Assumes Im u_1 = 0.
std::vector<CVector> section_basis(const CVector& u) {
  const int n = static_cast<int>(u.size());
  std::vector<CVector> basis;
  basis.reserve(2 * n - 2);
  std::vector<CVector> cand;
  for (int k = 0; k < n; ++k) {
    CVector e = CVector::Zero(n);
    e(k) = 1.0;
    cand.push_back(e);
    if (k > 0) {
      CVector ie = CVector::Zero(n);
      ie(k) = Complex(0.0, 1.0);
      cand.push_back(ie);
    }
  }
  auto re_dot = [](const CVector& a, const CVector& b) { return a.dot(b).real(); };
  for (const CVector& c : cand) {
    CVector h = c - u * re_dot(u, c);
    for (const CVector& t : basis) h -= t * re_dot(t, h);
    const double nrm = std::sqrt(h.squaredNorm());
    if (nrm > 1e-8) basis.push_back(h / nrm);
  }
  if (static_cast<int>(basis.size()) != 2 * n - 2)
    throw Error("jacobian_fd_check: degenerate sphere chart");
  return basis;
}

double chart_det(const DeflationChain& chain, double h) {
  const int m = static_cast<int>(chain.steps.size());
  const int nfull = chain.full_dim();
  const int dim = 2 * nfull * nfull;

  std::vector<std::vector<CVector>> tb;
  for (const auto& s : chain.steps) tb.push_back(section_basis(s.sphere_point));

  int nparams = 2 * static_cast<int>(chain.residual.size());
  for (int j = 0; j < m; ++j)
    nparams += 2 + static_cast<int>(tb[j].size()) + 2 * static_cast<int>(chain.steps[j].w.size());
  if (nparams != dim) throw DimensionMismatch("jacobian_fd_check: chart dimension mismatch");

  auto eval = [&](const RVector& delta) {
    DeflationChain c = chain;
    int idx = 0;
    for (int j = 0; j < m; ++j) {
      c.steps[j].lambda += Complex(delta(idx), delta(idx + 1));
      idx += 2;
      CVector u = chain.steps[j].sphere_point;
      for (std::size_t k = 0; k < tb[j].size(); ++k) u += delta(idx + k) * tb[j][k];
      idx += static_cast<int>(tb[j].size());
      c.steps[j].sphere_point = phase_fixed(u.normalized());
      const int nw = static_cast<int>(chain.steps[j].w.size());
      for (int i = 0; i < nw; ++i)
        c.steps[j].w(i) += Complex(delta(idx + i), delta(idx + nw + i));
      idx += 2 * nw;
    }
    const int nm = static_cast<int>(chain.residual.rows());
    for (int ccol = 0; ccol < nm; ++ccol)
      for (int rrow = 0; rrow < nm; ++rrow) {
        c.residual(rrow, ccol) += Complex(delta(idx), delta(idx + nm * nm));
        ++idx;
      }
    const CMatrix out = phi_forward(c);
    RVector v(dim);
    int p = 0;
    for (int ccol = 0; ccol < nfull; ++ccol)
      for (int rrow = 0; rrow < nfull; ++rrow) {
        v(p) = out(rrow, ccol).real();
        v(p + nfull * nfull) = out(rrow, ccol).imag();
        ++p;
      }
    return v;
  };

  RMatrix jac(dim, dim);
  RVector delta = RVector::Zero(dim);
  for (int p = 0; p < dim; ++p) {
    delta(p) = h;
    const RVector fp = eval(delta);
    delta(p) = -h;
    const RVector fm = eval(delta);
    delta(p) = 0.0;
    jac.col(p) = (fp - fm) / (2.0 * h);
  }
  double chart_factor = 1.0;
  for (const auto& s : chain.steps) chart_factor *= s.sphere_point(0).real();
  return std::abs(jac.determinant()) / chart_factor;
}

}  // namespace

JacobianCheck jacobian_fd_check(const DeflationChain& chain, double h) {
  for (const auto& s : chain.steps)
    if (std::abs(s.sphere_point(0).imag()) > 1e-12 || s.sphere_point(0).real() <= 0.0)
      throw Error("jacobian_fd_check: sphere points must be phase-fixed");

  const double v1 = chart_det(chain, h);
  const double v2 = chart_det(chain, 0.5 * h);
  if (std::max(v1, v2) > 1e-9 && std::abs(v1 - v2) > 0.10 * std::max(std::abs(v2), 1e-12))
    throw FDInstability("jacobian_fd_check: step sizes h and h/2 disagree by more than 10%");

  double formula = 1.0;
  const int m = static_cast<int>(chain.steps.size());
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      formula *= std::norm(chain.steps[j].lambda - chain.steps[i].lambda);
  const int nm = static_cast<int>(chain.residual.rows());
  for (int j = 0; j < m; ++j) {
    const CMatrix shifted =
        chain.steps[j].lambda * CMatrix::Identity(nm, nm) - chain.residual;
    formula *= std::norm(shifted.determinant());
  }

  JacobianCheck out;
  out.fd_value = v2;
  out.formula_value = formula;
  out.rel_error = std::abs(v2 - formula) / std::max(formula, 1e-14);
  return out;
}

CVector evec_reconstruct(const DeflationStep& step, Complex lambda, const CVector& x,
                         Side vector_side) {
  const Complex gap = lambda - step.lambda;
  const int n = static_cast<int>(x.size()) + 1;
  if (step.sphere_point.size() != n)
    throw DimensionMismatch("evec_reconstruct: dimension mismatch");

  Complex head(0.0, 0.0);
  const bool needs_gap = (step.side == Side::Right && vector_side == Side::Right) ||
                         (step.side == Side::Left && vector_side == Side::Left);
  if (needs_gap) {
    if (std::abs(gap) < 1e-12)
      throw EigenvalueCollision("evec_reconstruct: lambda collides with the deflated eigenvalue");
    const Complex wx = step.w.dot(x);  // w* x
    head = step.side == Side::Right ? wx / gap : wx / std::conj(gap);
  }
  CVector lifted(n);
  lifted(0) = head;
  lifted.tail(n - 1) = x;
  CVector out = householder(step.sphere_point) * lifted;
  return out.normalized();
}

CVector evec_reconstruct_chain(const DeflationChain& chain, int j0, Complex lambda,
                               const CVector& x, Side vector_side) {
  CVector cur = x;
  for (int j = j0; j >= 1; --j)
    cur = evec_reconstruct(chain.steps[static_cast<std::size_t>(j) - 1], lambda, cur, vector_side);
  return cur;
}

KqRatio kq_ratio_check(const CMatrix& a, Complex lambda, double t, double q,
                       const ProjectionObservable& obs) {
  const int n = static_cast<int>(a.rows());
  if (obs.dim() != n) throw DimensionMismatch("kq_ratio_check: observable dimension mismatch");
  const CMatrix shifted = a - lambda * CMatrix::Identity(n, n);
  const CMatrix gram = shifted.adjoint() * shifted;

  Eigen::SelfAdjointEigenSolver<CMatrix> sv(gram, Eigen::EigenvaluesOnly);
  RVector xi = sv.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const double eta = eta_zt(xi, t);
  const double eta2 = eta * eta;

  const CMatrix base = gram + eta2 * CMatrix::Identity(n, n);
  const CMatrix pert = base - (t * q) * obs.tt_matrix();
  const double scale = static_cast<double>(n) / t;

  Eigen::SelfAdjointEigenSolver<CMatrix> e0(base, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<CMatrix> eq(0.5 * (pert + pert.adjoint()),
                                            Eigen::EigenvaluesOnly);
  if (q > 0.0 && eq.eigenvalues().minCoeff() <= 0.0)
    throw PositivityLost("kq_ratio_check: quadratic form lost positive definiteness");

  const double log_kq = log_sphere_exp_integral_from_eigs(scale * eq.eigenvalues());
  const double log_k0 = log_sphere_exp_integral_from_eigs(scale * e0.eigenvalues());

  // det side, reduced to the observable's rank
  Eigen::LLT<CMatrix> llt(base);
  if (llt.info() != Eigen::Success) throw IllConditioned("kq_ratio_check: Cholesky failed");
  const CMatrix hw = llt.solve(obs.vectors);
  const RVector sq = obs.weights.cwiseSqrt();
  CMatrix small = CMatrix::Identity(obs.rank(), obs.rank()) -
                  (t * q) * (sq.asDiagonal() * (obs.vectors.adjoint() * hw) * sq.asDiagonal());
  const Complex det_small = small.determinant();

  KqRatio out;
  out.eta = eta;
  out.log_ratio = log_kq - log_k0;
  out.log_det = -std::log(std::abs(det_small));
  out.gap = out.log_ratio - out.log_det;
  return out;
}

double probe_positivity_limit(const CMatrix& a, Complex lambda, double t,
                              const ProjectionObservable& obs) {
  const int n = static_cast<int>(a.rows());
  const CMatrix shifted = a - lambda * CMatrix::Identity(n, n);
  const CMatrix gram = shifted.adjoint() * shifted;
  Eigen::SelfAdjointEigenSolver<CMatrix> sv(gram, Eigen::EigenvaluesOnly);
  const double eta = eta_zt(RVector(sv.eigenvalues().cwiseMax(0.0).cwiseSqrt()), t);
  const CMatrix base = gram + eta * eta * CMatrix::Identity(n, n);
  const CMatrix tt = obs.tt_matrix();
  auto pd = [&](double q) {
    const CMatrix k = base - (t * q) * tt;
    Eigen::LLT<CMatrix> llt(0.5 * (k + k.adjoint()));
    return llt.info() == Eigen::Success;
  };
  double lo = 0.0, hi = 1.0;
  while (pd(hi) && hi < 1e12) {
    lo = hi;
    hi *= 2.0;
  }
  if (hi >= 1e12) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (pd(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace evlab
