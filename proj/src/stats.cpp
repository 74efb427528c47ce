#include "evlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evlab/divided_difference.hpp"
#include "evlab/errors.hpp"

namespace evlab {

double limit_law_cdf(const LimitLaw& law, double x) {
  if (x < 0.0) throw std::invalid_argument("limit_law_cdf: x >= 0 required");
  if (x == 0.0) return 0.0;
  const int n = static_cast<int>(law.weights.size());
  if (n == 0) throw std::invalid_argument("limit_law_cdf: empty weight list");
  if ((law.weights.array() <= 0.0).any())
    throw std::invalid_argument("limit_law_cdf: weights must be positive");
  // F(x) = (prod mu_k) x^n exp[-x mu_1, ..., -x mu_n, 0] with mu_k = 1/q_k
  RVector nodes(n + 1);
  double log_pref = 0.0;
  for (int k = 0; k < n; ++k) {
    const double mu = 1.0 / law.weights(k);
    nodes(k) = -x * mu;
    log_pref += std::log(mu);
  }
  nodes(n) = 0.0;
  log_pref += n * std::log(x);
  const double f = std::exp(log_pref + log_exp_divided_difference(nodes));
  return std::min(1.0, std::max(0.0, f));
}

double limit_law_mgf(const LimitLaw& law, double s) {
  const double qmax = law.weights.maxCoeff();
  if (s >= 1.0 / qmax) throw std::invalid_argument("limit_law_mgf: s beyond 1/max q");
  double v = 1.0;
  for (int k = 0; k < law.weights.size(); ++k) v /= 1.0 - s * law.weights(k);
  return v;
}

double gaussian_square_cdf(double x, double frob_sq) {
  if (x <= 0.0) return 0.0;
  return std::erf(std::sqrt(x / (2.0 * frob_sq)));
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max((i + 1) / n - f, f - i / n));
  }
  return d;
}

namespace {

double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    s += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, s));
}

}  // namespace

TestResult ks_test(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                   double threshold, const std::string& name) {
  if (samples.size() < 100) throw std::invalid_argument("ks_test: need at least 100 samples");
  TestResult r;
  r.name = name;
  r.n = samples.size();
  r.statistic = ks_statistic(samples, cdf);
  r.threshold = threshold;
  const double sn = std::sqrt(static_cast<double>(r.n));
  r.p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * r.statistic);
  r.standard_error = 0.5 / sn;  // rough scale of the null KS distance
  r.pass = r.statistic <= threshold;
  return r;
}

TestResult ks_test(const SampleSet& samples, const LimitLaw& law, double threshold) {
  return ks_test(
      samples.values, [&](double x) { return limit_law_cdf(law, x); }, threshold,
      "ks:" + samples.label);
}

TestResult mgf_compare(const SampleSet& samples, const LimitLaw& law,
                       const std::vector<double>& s_grid, double max_se) {
  TestResult r;
  r.name = "mgf:" + samples.label;
  r.n = samples.values.size();
  r.threshold = max_se;
  double worst = 0.0;
  for (double s : s_grid) {
    if (s > 0.0) throw std::invalid_argument("mgf_compare: s-grid must be nonpositive");
    double mean = 0.0, m2 = 0.0;
    for (double x : samples.values) {
      const double e = std::exp(s * x);
      mean += e;
      m2 += e * e;
    }
    mean /= r.n;
    m2 /= r.n;
    const double var = std::max(0.0, m2 - mean * mean);
    const double se = std::sqrt(var / r.n);
    const double gap = std::abs(mean - limit_law_mgf(law, s));
    worst = std::max(worst, se > 0.0 ? gap / se : (gap > 0.0 ? 1e300 : 0.0));
  }
  r.statistic = worst;
  r.pass = worst <= max_se;
  return r;
}

TestResult mean_compare(const std::vector<double>& lhs, const std::vector<double>& rhs,
                        double max_se, const std::string& name) {
  if (lhs.empty() || rhs.empty()) throw std::invalid_argument("mean_compare: empty input");
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= v.size();
    return std::pair<double, double>(mean, var);
  };
  const auto [ml, vl] = stats(lhs);
  const auto [mr, vr] = stats(rhs);
  const double se = std::sqrt(vl / lhs.size() + vr / rhs.size());
  TestResult r;
  r.name = name;
  r.n = lhs.size();
  r.standard_error = se;
  r.statistic = se > 0.0 ? std::abs(ml - mr) / se : 0.0;
  r.threshold = max_se;
  r.pass = r.statistic <= max_se;
  return r;
}

IndependenceResult independence_check(const std::vector<double>& xs,
                                      const std::vector<double>& ys, double corr_threshold,
                                      double min_p) {
  if (xs.size() != ys.size() || xs.size() < 4)
    throw std::invalid_argument("independence_check: paired samples required");
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  IndependenceResult r;
  r.n = n;
  r.correlation = sxy / std::sqrt(std::max(sxx * syy, 1e-300));
  r.corr_threshold = corr_threshold;

  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const double medx = median(xs), medy = median(ys);
  double cnt[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) cnt[xs[i] > medx ? 1 : 0][ys[i] > medy ? 1 : 0] += 1.0;
  const double rows[2] = {cnt[0][0] + cnt[0][1], cnt[1][0] + cnt[1][1]};
  const double cols[2] = {cnt[0][0] + cnt[1][0], cnt[0][1] + cnt[1][1]};
  double chi2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expd = rows[i] * cols[j] / static_cast<double>(n);
      if (expd > 0.0) chi2 += (cnt[i][j] - expd) * (cnt[i][j] - expd) / expd;
    }
  r.chi2 = chi2;
  r.chi2_p = std::erfc(std::sqrt(chi2 / 2.0));  // one degree of freedom
  r.pass = std::abs(r.correlation) <= corr_threshold && r.chi2_p >= min_p;
  return r;
}

double ginue_correlation(const std::vector<Complex>& points) {
  const int m = static_cast<int>(points.size());
  if (m < 1 || m > 6) throw std::invalid_argument("ginue_correlation: m in [1, 6] required");
  CMatrix k(m, m);
  for (int j = 0; j < m; ++j)
    for (int l = 0; l < m; ++l) {
      const double a = std::norm(points[j]) + std::norm(points[l]);
      k(j, l) = std::exp(Complex(-0.5 * a, 0.0) + points[j] * std::conj(points[l])) / kPi;
    }
  return k.determinant().real();
}

}  // namespace evlab
