#include "evlab/hermitization.hpp"

#include <cmath>
#include <stdexcept>

#include "evlab/errors.hpp"

namespace evlab {

CMatrix hermitize(const CMatrix& a, Complex z) {
  if (a.rows() != a.cols()) throw DimensionMismatch("hermitize: square matrix required");
  const int n = static_cast<int>(a.rows());
  CMatrix h = CMatrix::Zero(2 * n, 2 * n);
  const CMatrix b = a - z * CMatrix::Identity(n, n);
  h.block(0, n, n, n) = b;
  h.block(n, 0, n, n) = b.adjoint();
  return h;
}

SymSpectrum::SymSpectrum(Complex z, RVector xi_ascending, CMatrix vecs)
    : z_(z), n_(static_cast<int>(xi_ascending.size()) / 2), xi_(std::move(xi_ascending)),
      vecs_(std::move(vecs)) {
  if (xi_.size() != 2 * n_ || vecs_.rows() != 2 * n_ || vecs_.cols() != 2 * n_)
    throw DimensionMismatch("SymSpectrum: 2N eigenpairs required");
}

SymSpectrum sym_spectrum(const CMatrix& a, Complex z) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitize(a, z));
  if (es.info() != Eigen::Success) throw Error("sym_spectrum: eigensolver did not converge");
  RVector xi = es.eigenvalues();  // ascending
  const int twon = static_cast<int>(xi.size());
  // enforce exact chiral symmetry on the values
  for (int i = 0; i < twon / 2; ++i) {
    const double s = 0.5 * (xi(twon - 1 - i) - xi(i));
    xi(twon - 1 - i) = s;
    xi(i) = -s;
  }
  return SymSpectrum(z, std::move(xi), es.eigenvectors());
}

double mean_h_from_xi(const RVector& xi_positive, double eta) {
  const double e2 = eta * eta;
  double s = 0.0;
  for (int k = 0; k < xi_positive.size(); ++k) s += 1.0 / (xi_positive(k) * xi_positive(k) + e2);
  return s / static_cast<double>(xi_positive.size());
}

namespace {

// Hager-style one-norm estimate of the inverse from the explicit inverse.
double cond1_estimate(const CMatrix& k, const CMatrix& kinv) {
  const double nk = k.cwiseAbs().colwise().sum().maxCoeff();
  const double nki = kinv.cwiseAbs().colwise().sum().maxCoeff();
  return nk * nki;
}

CMatrix hermitian_inverse(const CMatrix& gram, double eta, const char* what) {
  const int n = static_cast<int>(gram.rows());
  CMatrix k = gram + (eta * eta) * CMatrix::Identity(n, n);
  k = 0.5 * (k + k.adjoint());  // keep exactly Hermitian
  Eigen::LLT<CMatrix> llt(k);
  if (llt.info() != Eigen::Success)
    throw IllConditioned(std::string(what) + ": Cholesky failed (eta too small?)");
  CMatrix inv = llt.solve(CMatrix::Identity(n, n));
  if (cond1_estimate(k, inv) > 1e14)
    throw IllConditioned(std::string(what) + ": condition estimate above 1e14");
  return 0.5 * (inv + inv.adjoint());
}

}  // namespace

ResolventBundle resolvents(const CMatrix& a, Complex z, double eta) {
  if (eta <= 0.0) throw std::invalid_argument("resolvents: eta must be > 0");
  if (a.rows() != a.cols()) throw DimensionMismatch("resolvents: square matrix required");
  const int n = static_cast<int>(a.rows());
  ResolventBundle b;
  b.z = z;
  b.eta = eta;
  b.shifted = a - z * CMatrix::Identity(n, n);
  b.h = hermitian_inverse(b.shifted.adjoint() * b.shifted, eta, "resolvents[H]");
  b.htilde = hermitian_inverse(b.shifted * b.shifted.adjoint(), eta, "resolvents[Htilde]");
  return b;
}

CMatrix ResolventBundle::g() const {
  const int m = n();
  CMatrix out(2 * m, 2 * m);
  const Complex ieta(0.0, eta);
  out.block(0, 0, m, m) = ieta * htilde;
  out.block(0, m, m, m) = htilde * shifted;
  out.block(m, 0, m, m) = shifted.adjoint() * htilde;
  out.block(m, m, m, m) = ieta * h;
  return out;
}

namespace {

// Tr(X Y) for same-size square matrices without forming the product.
Complex trace_prod(const CMatrix& x, const CMatrix& y) {
  return (x.array() * y.transpose().array()).sum();
}

}  // namespace

SingleShiftTraces trace_functionals(const ResolventBundle& b) {
  const int n = b.n();
  const double invn = 1.0 / static_cast<double>(n);
  SingleShiftTraces t;
  t.eta = b.eta;
  t.h = b.h.trace().real() * invn;
  t.hht = trace_prod(b.h, b.htilde).real() * invn;
  t.h2 = b.h.squaredNorm() * invn;  // Tr H^2 = ||H||_F^2 for Hermitian H
  const CMatrix hb = b.h * b.shifted;
  t.h2az = trace_prod(b.h, hb) * invn;

  // G-block traces, 2N-normalized. With G = [[i eta Ht, Ht B], [B* Ht, i eta H]]:
  //   Tr[G E12 G E21] = Tr[G11 G22],  Tr[G E12 G E12] = Tr[G21 G21],
  //   Tr[G E21 G E12] = Tr[G22 G11],  Tr[G E21 G E21] = Tr[G12 G12].
  const double inv2n = 0.5 * invn;
  const Complex ieta(0.0, b.eta);
  const Complex tr_g11_g22 = (ieta * ieta) * trace_prod(b.htilde, b.h);
  t.g12_21 = tr_g11_g22 * inv2n;
  t.g21_12 = tr_g11_g22 * inv2n;
  const CMatrix g21 = b.shifted.adjoint() * b.htilde;
  t.g12_12 = trace_prod(g21, g21) * inv2n;
  const CMatrix g12 = b.htilde * b.shifted;
  t.g21_21 = trace_prod(g12, g12) * inv2n;
  return t;
}

CrossShiftTraces cross_trace_functionals(const ResolventBundle& b1, const ResolventBundle& b2) {
  if (b1.n() != b2.n()) throw DimensionMismatch("cross_trace_functionals: dimension mismatch");
  const double invn = 1.0 / static_cast<double>(b1.n());
  CrossShiftTraces t;
  t.hh = trace_prod(b1.h, b2.h).real() * invn;
  t.htht = trace_prod(b1.htilde, b2.htilde).real() * invn;
  t.hht = trace_prod(b1.h, b2.htilde).real() * invn;
  return t;
}

Complex two_eta_g_trace(const ResolventBundle& b1, const ResolventBundle& b2, bool b1_is_e12,
                        bool b2_is_e12) {
  if (b1.n() != b2.n()) throw DimensionMismatch("two_eta_g_trace: dimension mismatch");
  const int n = b1.n();
  const CMatrix g1 = b1.g();
  const CMatrix g2 = b2.g();
  auto block = [n](const CMatrix& g, int i, int j) { return g.block(i * n, j * n, n, n); };
  // Tr[G1 B1 G2 B2] reduced to blocks: B = E12 shifts column blocks.
  Complex tr;
  if (b1_is_e12 && b2_is_e12) tr = trace_prod(block(g1, 1, 0), block(g2, 1, 0));
  else if (b1_is_e12 && !b2_is_e12) tr = trace_prod(block(g1, 0, 0), block(g2, 1, 1));
  else if (!b1_is_e12 && b2_is_e12) tr = trace_prod(block(g1, 1, 1), block(g2, 0, 0));
  else tr = trace_prod(block(g1, 0, 1), block(g2, 0, 1));
  return tr / (2.0 * n);
}

VResult v_functional(const SymSpectrum& s, const ProjectionObservable& t, Side side,
                     double delta_v) {
  if (delta_v <= 0.0 || delta_v >= 0.5)
    throw std::invalid_argument("v_functional: delta_V must lie in (0, 0.5)");
  const int n = s.n();
  if (t.dim() != n) throw DimensionMismatch("v_functional: observable dimension mismatch");
  const double eta = std::pow(static_cast<double>(n), -1.0 - delta_v);
  const double eta2 = eta * eta;
  const int twon = 2 * n;
  const int off = side == Side::Right ? n : 0;  // lower half for right vectors

  double eigsum = 0.0;
  for (int i = 0; i < twon; ++i) {
    const double xi = s.xi_all()(i);
    double tnorm = 0.0;
    for (int k = 0; k < t.rank(); ++k)
      tnorm += t.weights(k) * std::norm(t.vectors.col(k).dot(s.vecs_all().col(i).segment(off, n)));
    eigsum += n * eta2 / (xi * xi + eta2) * tnorm;
  }

  // Trace form N eta Tr[T*T Im G]. Assemble Im G when small enough, otherwise
  // apply it column by column to the embedded observable vectors.
  double trace_form = 0.0;
  RVector w = (eta / (s.xi_all().array().square() + eta2)).matrix();
  if (twon <= 600) {
    const CMatrix im_g = s.vecs_all() * w.asDiagonal() * s.vecs_all().adjoint();
    for (int k = 0; k < t.rank(); ++k) {
      CVector emb = CVector::Zero(twon);
      emb.segment(off, n) = t.vectors.col(k);
      trace_form += n * eta * t.weights(k) * (emb.dot(im_g * emb)).real();
    }
  } else {
    for (int k = 0; k < t.rank(); ++k) {
      CVector emb = CVector::Zero(twon);
      emb.segment(off, n) = t.vectors.col(k);
      const CVector proj = s.vecs_all().adjoint() * emb;
      trace_form += n * eta * t.weights(k) * (proj.array().abs2() * w.array()).sum();
    }
  }

  const double rel = std::abs(eigsum - trace_form) / std::max(std::abs(eigsum), 1e-300);
  if (eigsum != 0.0 && rel > 1e-8)
    throw Error("v_functional: eigen-sum and trace forms disagree");
  return VResult{eigsum, trace_form, eta};
}

VResult v_functional(const CMatrix& a, Complex z, const ProjectionObservable& t, Side side,
                     double delta_v) {
  return v_functional(sym_spectrum(a, z), t, side, delta_v);
}

}  // namespace evlab
