#include "evlab/dse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "evlab/errors.hpp"
#include "evlab/hermitization.hpp"

namespace evlab {

namespace {

struct Cubic {
  // m^3 + b m^2 + c m + d with b = 2w, c = w^2 + 1 - |z|^2, d = w
  Complex b, c, d;

  Complex eval(Complex m) const { return ((m + b) * m + c) * m + d; }
  Complex deriv(Complex m) const { return (3.0 * m + 2.0 * b) * m + c; }

  std::array<Complex, 3> roots() const {
    Eigen::Matrix3cd comp = Eigen::Matrix3cd::Zero();
    comp(0, 2) = -d;
    comp(1, 2) = -c;
    comp(2, 2) = -b;
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(comp, false);
    std::array<Complex, 3> r;
    for (int i = 0; i < 3; ++i) {
      Complex m = es.eigenvalues()(i);
      for (int it = 0; it < 3; ++it) {  // Newton polish
        const Complex dp = deriv(m);
        if (std::abs(dp) < 1e-300) break;
        m -= eval(m) / dp;
      }
      r[i] = m;
    }
    return r;
  }
};

Cubic make_cubic(Complex z, Complex w) {
  return Cubic{2.0 * w, w * w + (1.0 - std::norm(z)), w};
}

// Branch anchor: at w = i the solution is the root of maximal imaginary part.
Complex anchor_root(Complex z) {
  const auto roots = make_cubic(z, Complex(0.0, 1.0)).roots();
  Complex best = roots[0];
  for (const Complex& m : roots)
    if (m.imag() > best.imag()) best = m;
  return best;
}

Complex pick_admissible(Complex z, Complex w) {
  const auto roots = make_cubic(z, w).roots();
  const double sw = w.imag() > 0 ? 1.0 : -1.0;
  int count = 0;
  Complex best;
  double best_im = -1.0;
  for (const Complex& m : roots) {
    if (m.imag() * sw > 0.0) {
      ++count;
      if (m.imag() * sw > best_im) {
        best_im = m.imag() * sw;
        best = m;
      }
    }
  }
  if (count == 1) return best;
  if (count == 0) throw BranchAmbiguity("solve_mz: no admissible root");

  // Several admissible roots: track the branch continuously from w = i,
  // where the solution is unambiguous.
  Complex m = anchor_root(z);
  const int steps = 200;
  const Complex w0(0.0, 1.0);
  for (int s = 1; s <= steps; ++s) {
    const Complex ws = w0 + (w - w0) * (static_cast<double>(s) / steps);
    const auto rs = make_cubic(z, ws).roots();
    double dmin = 1e300;
    Complex nearest;
    for (const Complex& r : rs) {
      const double dd = std::abs(r - m);
      if (dd < dmin) {
        dmin = dd;
        nearest = r;
      }
    }
    m = nearest;
  }
  if (m.imag() * sw <= 0.0)
    throw BranchAmbiguity("solve_mz: continuity tracking left the admissible branch");
  return m;
}

}  // namespace

double DetEquivalent::residual() const {
  const Complex p = make_cubic(z, w).eval(m);
  const double denom = std::abs(m * (w + m));
  return denom > 0 ? std::abs(p) / denom : std::abs(p);
}

DetEquivalent solve_mz(Complex z, Complex w) {
  if (w.imag() < 0.0)
    throw std::invalid_argument("solve_mz: Im(w) >= 0 required (upper half plane or boundary)");
  Complex m;
  if (w.imag() > 0.0) {
    m = pick_admissible(z, w);
  } else {
    // boundary value: evaluate slightly above the axis, then polish on the
    // real-w cubic so the residual is that of the requested w
    m = pick_admissible(z, Complex(w.real(), 1e-10));
    const Cubic cub = make_cubic(z, w);
    for (int it = 0; it < 4; ++it) {
      const Complex dp = cub.deriv(m);
      if (std::abs(dp) < 1e-300) break;
      m -= cub.eval(m) / dp;
    }
    if (m.imag() < 0.0) m = std::conj(m);  // real coefficients: conjugate is a root too
  }
  DetEquivalent out;
  out.z = z;
  out.w = w;
  out.m = m;
  out.u = m / (w + m);
  out.big_m << m, -z * out.u, -std::conj(z) * out.u, m;
  return out;
}

namespace {

// Discriminant of m^3 + b m^2 + c m + d (real coefficients, real E).
double cubic_discriminant(double b, double c, double d) {
  return 18.0 * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * c * c * c -
         27.0 * d * d;
}

// Stable Cardano for the one-real-two-complex case of the real cubic
// m^3 + b m^2 + c m + d: returns the imaginary part of the complex pair.
double rho_inside(Complex z, double e) {
  const double b = 2.0 * e;
  const double c = e * e + 1.0 - std::norm(z);
  const double d = e;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double s2 = q * q / 4.0 + p * p * p / 27.0;  // > 0 off the edge
  if (s2 <= 0.0) return 0.0;
  const double s = std::sqrt(s2);
  const double aa = std::cbrt(-q / 2.0 - (q >= 0.0 ? s : -s));  // avoid cancellation
  const double bb = aa != 0.0 ? -p / (3.0 * aa) : 0.0;
  return std::abs(std::sqrt(3.0) / 2.0 * (aa - bb)) / kPi;
}

}  // namespace

double rho_z(Complex z, double e) {
  const double b = 2.0 * e;
  const double c = e * e + 1.0 - std::norm(z);
  const double d = e;
  // positive discriminant: three real roots, no spectral mass
  if (cubic_discriminant(b, c, d) >= 0.0) return 0.0;
  return rho_inside(z, e);
}

double support_edge(Complex z) {
  auto disc = [&](double e) {
    const double c = e * e + 1.0 - std::norm(z);
    return cubic_discriminant(2.0 * e, c, e);
  };
  double lo = 0.0, hi = 4.0;
  if (disc(lo) >= 0.0) throw BracketFailure("support_edge: density vanishes at E = 0");
  if (disc(hi) < 0.0) throw BracketFailure("support_edge: no sign change on [0, 4]");
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (disc(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  struct Rec {
    const std::function<double(double)>& f;
    double run(double a, double fa, double b, double fb, double m, double fm, double whole,
               double tol, int depth) {
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fb + 4.0 * frm + fm);
      if (depth <= 0) return left + right;
      if (std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
      return run(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
             run(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
    }
  };
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  Rec rec{f};
  return rec.run(a, fa, b, fb, m, fm, whole, tol, max_depth);
}

DensityProfile quantiles(Complex z, int n, int grid_points) {
  if (std::abs(z) >= 1.0) throw std::invalid_argument("quantiles: |z| < 1 required");
  DensityProfile p;
  p.z = z;
  p.edge = support_edge(z);
  auto density = [z](double e) { return rho_z(z, e); };

  p.e_grid = RVector::LinSpaced(grid_points, -p.edge, p.edge);
  p.rho = RVector(grid_points);
  for (int i = 0; i < grid_points; ++i) p.rho(i) = rho_z(z, p.e_grid(i));

  // cumulative mass on [0, edge] over a fixed node grid, then per-quantile
  // bisection refined with local adaptive quadrature
  const int cells = 1024;
  RVector node(cells + 1), cum(cells + 1);
  cum(0) = 0.0;
  for (int i = 0; i <= cells; ++i) node(i) = p.edge * i / cells;
  for (int i = 1; i <= cells; ++i)
    cum(i) = cum(i - 1) + adaptive_simpson(density, node(i - 1), node(i), 1e-13, 36);
  const double half_mass = cum(cells);
  if (std::abs(2.0 * half_mass - 1.0) > 1e-8)
    throw QuadratureFailure("quantiles: density mass deviates from 1");

  p.gamma_all = RVector::Zero(2 * n + 1);
  for (int j = 1; j <= n; ++j) {
    const double target = static_cast<double>(j) / (2.0 * n);
    if (target >= half_mass) {
      p.gamma_all(n + j) = p.edge;
      continue;
    }
    const int cell = static_cast<int>(
        std::upper_bound(cum.data(), cum.data() + cells + 1, target) - cum.data() - 1);
    double lo = node(cell), hi = node(std::min(cell + 1, cells));
    auto cdf_from_node = [&](double x) {
      return cum(cell) + adaptive_simpson(density, node(cell), x, 1e-13, 36);
    };
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf_from_node(mid) < target ? lo : hi) = mid;
      if (hi - lo < 1e-12) break;
    }
    p.gamma_all(n + j) = 0.5 * (lo + hi);
  }
  for (int j = 1; j <= n; ++j) p.gamma_all(n - j) = -p.gamma_all(n + j);
  return p;
}

std::vector<std::pair<double, double>> kappa_bulk(Complex z, double kappa) {
  if (kappa <= 0.0) throw std::invalid_argument("kappa_bulk: kappa > 0 required");
  const double level = std::cbrt(kappa);
  const double edge = support_edge(z);
  const int pts = 4001;
  auto above = [&](double e) { return rho_z(z, e) >= level; };

  std::vector<std::pair<double, double>> intervals;
  double start = 0.0;
  bool open = false;
  double prev = -edge;
  bool prev_above = above(prev);
  if (prev_above) {
    open = true;
    start = prev;
  }
  for (int i = 1; i < pts; ++i) {
    const double x = -edge + 2.0 * edge * i / (pts - 1);
    const bool now = above(x);
    if (now != prev_above) {
      // refine the crossing
      double lo = prev, hi = x;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) == prev_above ? lo : hi) = mid;
      }
      const double cross = 0.5 * (lo + hi);
      if (now) {
        open = true;
        start = cross;
      } else {
        intervals.emplace_back(start, cross);
        open = false;
      }
    }
    prev = x;
    prev_above = now;
  }
  if (open) intervals.emplace_back(start, edge);
  return intervals;
}

double eta_zt(const RVector& xi_positive, double t) {
  if (t <= 0.0) throw std::invalid_argument("eta_zt: t > 0 required");
  auto f = [&](double eta) { return t * mean_h_from_xi(xi_positive, eta) - 1.0; };
  double lo = 1e-8, hi = 1e2;
  if (f(lo) <= 0.0 || f(hi) >= 0.0)
    throw BracketFailure("eta_zt: no sign change on [1e-8, 1e2] (t outside valid regime)");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
    if (hi - lo < 1e-15 * hi) break;
  }
  double eta = 0.5 * (lo + hi);
  // Newton polish on the residual
  for (int it = 0; it < 4; ++it) {
    const double e2 = eta * eta;
    double s = 0.0, ds = 0.0;
    for (int k = 0; k < xi_positive.size(); ++k) {
      const double q = 1.0 / (xi_positive(k) * xi_positive(k) + e2);
      s += q;
      ds += -2.0 * eta * q * q;
    }
    s /= xi_positive.size();
    ds /= xi_positive.size();
    const double res = t * s - 1.0;
    if (std::abs(res) <= 1e-12 || ds == 0.0) break;
    eta -= res / (t * ds);
  }
  if (std::abs(t * mean_h_from_xi(xi_positive, eta) - 1.0) > 1e-10)
    throw BracketFailure("eta_zt: residual tolerance not reached");
  return eta;
}

double eta_zt(const SymSpectrum& spectrum, double t) { return eta_zt(spectrum.xi_positive(), t); }

}  // namespace evlab
