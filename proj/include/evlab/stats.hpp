#pragma once

#include <functional>
#include <string>
#include <vector>

#include "evlab/common.hpp"

namespace evlab {

struct SampleSet {
  std::string label;
  std::vector<double> values;
  std::string metadata;  // free-form JSON string carried into CSV headers
};

enum class LawKind { Hypoexponential, Exponential };

/// Limiting law of sum_k q_k E_k with independent standard exponentials E_k;
/// MGF prod_k (1 - s q_k)^{-1} for s < 1 / max q_k.
struct LimitLaw {
  RVector weights;  // q_k > 0
  LawKind kind = LawKind::Hypoexponential;
};

/// CDF of the law; clustered weights are handled through the same divided-
/// difference engine as the spherical integrals.
double limit_law_cdf(const LimitLaw& law, double x);
double limit_law_mgf(const LimitLaw& law, double s);

/// CDF of Z^2 with Z ~ N(0, frob_sq) real — the competing one-dimensional
/// reading of the limit; kept for discrimination experiments.
double gaussian_square_cdf(double x, double frob_sq);

struct TestResult {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::size_t n = 0;
  double standard_error = 0.0;
  double p_value = 0.0;
};

/// Two-sided KS distance of samples against a CDF, with the asymptotic
/// Kolmogorov p-value. `threshold` is the pass criterion on the distance.
TestResult ks_test(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                   double threshold, const std::string& name = "ks");
TestResult ks_test(const SampleSet& samples, const LimitLaw& law, double threshold);

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Empirical mean of e^{s x} against the law MGF on a nonpositive s-grid;
/// statistic is the largest gap in standard-error units.
TestResult mgf_compare(const SampleSet& samples, const LimitLaw& law,
                       const std::vector<double>& s_grid, double max_se = 3.0);

/// Two-sample mean comparison in pooled-standard-error units.
TestResult mean_compare(const std::vector<double>& lhs, const std::vector<double>& rhs,
                        double max_se = 3.0, const std::string& name = "mean-compare");

/// Pearson correlation plus a median-split 2x2 chi-square independence test.
struct IndependenceResult {
  double correlation = 0.0;
  double corr_threshold = 0.0;
  double chi2 = 0.0;
  double chi2_p = 0.0;
  std::size_t n = 0;
  bool pass = false;
};

IndependenceResult independence_check(const std::vector<double>& xs,
                                      const std::vector<double>& ys,
                                      double corr_threshold = 0.05, double min_p = 0.01);

/// det[pi^{-1} exp(-(|w_j|^2 + |w_l|^2)/2 + w_j conj(w_l))]_{j,l}
double ginue_correlation(const std::vector<Complex>& points);

}  // namespace evlab
