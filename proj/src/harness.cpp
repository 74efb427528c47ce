#include "evlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "evlab/changevar.hpp"
#include "evlab/errors.hpp"

namespace evlab {

namespace fs = std::filesystem;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Sample: return "sample";
    case ExperimentKind::Spectrum: return "spectrum";
    case ExperimentKind::VerifyA1: return "verify-a1";
    case ExperimentKind::VerifyA2: return "verify-a2";
    case ExperimentKind::VerifyA3: return "verify-a3";
    case ExperimentKind::Rigidity: return "rigidity";
    case ExperimentKind::Eth: return "eth";
    case ExperimentKind::LevelRepulsion: return "level-repulsion";
    case ExperimentKind::JacobianCheck: return "jacobian-check";
    case ExperimentKind::KqRatio: return "kq-ratio";
    case ExperimentKind::EvecStats: return "evec-stats";
    case ExperimentKind::Mgf: return "mgf";
    case ExperimentKind::Independence: return "independence";
    case ExperimentKind::DseTable: return "dse-table";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(ExperimentKind::DseTable); ++k)
    if (to_string(static_cast<ExperimentKind>(k)) == s) return static_cast<ExperimentKind>(k);
  throw std::invalid_argument("unknown experiment kind: " + s);
}

double TRule::t_of(int n) const {
  if (mode == "fixed") return value;
  if (mode == "power") return std::pow(static_cast<double>(n), -1.0 / 3.0 + value);
  throw std::invalid_argument("TRule: mode must be 'fixed' or 'power'");
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["kind"] = evlab::to_string(kind);
  j["ensemble"] = {{"family", evlab::to_string(ensemble.family)},
                   {"dim", ensemble.dim},
                   {"t", ensemble.t},
                   {"normalize_1plust", ensemble.normalize_1plust}};
  j["n_list"] = n_list;
  j["t_rule"] = {{"mode", t_rule.mode}, {"value", t_rule.value}};
  Json jt = Json::array();
  for (const auto& t : targets)
    jt.push_back({{"re", t.z.real()},
                  {"im", t.z.imag()},
                  {"side", t.side == Side::Right ? "right" : "left"}});
  j["targets"] = jt;
  j["observable"] = {{"weights", observable.weights}, {"basis", observable.basis}};
  j["delta_v"] = delta_v;
  j["deltas"] = deltas;
  j["kappa"] = kappa;
  j["epsilon"] = epsilon;
  j["q"] = q;
  j["s_grid"] = s_grid;
  j["eta_grid"] = {{"min_exp", eta_min_exp}, {"max", eta_max}, {"points", eta_points}};
  j["n_samples"] = n_samples;
  j["discard_cap"] = discard_cap;
  j["thresholds"] = {{"ks", thresholds.ks},
                     {"ks_reject", thresholds.ks_reject},
                     {"corr", thresholds.corr},
                     {"chi2_p", thresholds.chi2_p},
                     {"mgf_se", thresholds.mgf_se},
                     {"slope_tol", thresholds.slope_tol},
                     {"c_max", thresholds.c_max},
                     {"jac_rel", thresholds.jac_rel},
                     {"jac_degenerate_abs", thresholds.jac_degenerate_abs},
                     {"kq_gap", thresholds.kq_gap},
                     {"pass_fraction", thresholds.pass_fraction}};
  j["out_dir"] = out_dir;
  j["master_seed"] = master_seed;
  j["threads"] = threads;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  const auto& je = j.at("ensemble");
  c.ensemble.family = family_from_string(je.at("family").get<std::string>());
  c.ensemble.dim = je.at("dim").get<int>();
  c.ensemble.t = je.value("t", 0.0);
  c.ensemble.normalize_1plust = je.value("normalize_1plust", false);
  c.n_list = j.value("n_list", std::vector<int>{});
  if (j.contains("t_rule")) {
    c.t_rule.mode = j["t_rule"].value("mode", "fixed");
    c.t_rule.value = j["t_rule"].value("value", 0.0);
  }
  if (j.contains("targets")) {
    c.targets.clear();
    for (const auto& t : j["targets"])
      c.targets.push_back({Complex(t.at("re").get<double>(), t.at("im").get<double>()),
                           t.value("side", "right") == "left" ? Side::Left : Side::Right});
  }
  if (j.contains("observable")) {
    c.observable.weights = j["observable"].value("weights", std::vector<double>{1.0});
    c.observable.basis = j["observable"].value("basis", "canonical");
  }
  c.delta_v = j.value("delta_v", c.delta_v);
  c.deltas = j.value("deltas", c.deltas);
  c.kappa = j.value("kappa", c.kappa);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.q = j.value("q", c.q);
  c.s_grid = j.value("s_grid", c.s_grid);
  if (j.contains("eta_grid")) {
    c.eta_min_exp = j["eta_grid"].value("min_exp", c.eta_min_exp);
    c.eta_max = j["eta_grid"].value("max", c.eta_max);
    c.eta_points = j["eta_grid"].value("points", c.eta_points);
  }
  c.n_samples = j.value("n_samples", c.n_samples);
  c.discard_cap = j.value("discard_cap", c.discard_cap);
  if (j.contains("thresholds")) {
    const auto& jt = j["thresholds"];
    c.thresholds.ks = jt.value("ks", c.thresholds.ks);
    c.thresholds.ks_reject = jt.value("ks_reject", c.thresholds.ks_reject);
    c.thresholds.corr = jt.value("corr", c.thresholds.corr);
    c.thresholds.chi2_p = jt.value("chi2_p", c.thresholds.chi2_p);
    c.thresholds.mgf_se = jt.value("mgf_se", c.thresholds.mgf_se);
    c.thresholds.slope_tol = jt.value("slope_tol", c.thresholds.slope_tol);
    c.thresholds.c_max = jt.value("c_max", c.thresholds.c_max);
    c.thresholds.jac_rel = jt.value("jac_rel", c.thresholds.jac_rel);
    c.thresholds.jac_degenerate_abs =
        jt.value("jac_degenerate_abs", c.thresholds.jac_degenerate_abs);
    c.thresholds.kq_gap = jt.value("kq_gap", c.thresholds.kq_gap);
    c.thresholds.pass_fraction = jt.value("pass_fraction", c.thresholds.pass_fraction);
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.threads = j.value("threads", c.threads);
  return c;
}

std::uint64_t ExperimentConfig::config_digest() const { return digest(to_json().dump()); }

EnsembleSpec ExperimentConfig::materialized_ensemble() const {
  EnsembleSpec s = ensemble;
  s.master_seed = master_seed;
  return s;
}

Json RunRecord::to_json() const {
  Json j;
  j["version"] = version;
  j["config"] = config.to_json();
  j["config_digest"] = digest;
  j["samples_used"] = used;
  j["samples_discarded"] = discarded;
  j["aggregate"] = aggregate;
  j["wall_ms"] = wall_ms;
  return j;
}

void parallel_for_indexed(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> counter{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = counter.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double pairwise_sum(const std::vector<double>& v) {
  std::function<double(std::size_t, std::size_t)> rec = [&](std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += v[i];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return rec(lo, mid) + rec(mid, hi);
  };
  return v.empty() ? 0.0 : rec(0, v.size());
}

Json scaling_report_to_json(const ScalingReport& r) {
  Json j;
  j["quantity"] = r.quantity;
  j["grid"] = std::vector<double>(r.grid.data(), r.grid.data() + r.grid.size());
  j["values"] = std::vector<double>(r.values.data(), r.values.data() + r.values.size());
  if (!std::isnan(r.target_slope)) {
    j["slope"] = r.slope;
    j["target_slope"] = r.target_slope;
    j["r2"] = r.r2;
  }
  j["c"] = r.c_const;
  j["C"] = r.big_c_const;
  j["pass"] = r.pass;
  return j;
}

Json test_result_to_json(const TestResult& r) {
  return Json{{"name", r.name},         {"statistic", r.statistic}, {"threshold", r.threshold},
              {"pass", r.pass},         {"n", r.n},                 {"se", r.standard_error},
              {"p_value", r.p_value}};
}

namespace {

RVector eta_grid_of(const ExperimentConfig& c, int n) {
  const double lo = std::pow(static_cast<double>(n), c.eta_min_exp);
  RVector g(c.eta_points);
  for (int i = 0; i < c.eta_points; ++i)
    g(i) = lo * std::pow(c.eta_max / lo, static_cast<double>(i) / std::max(1, c.eta_points - 1));
  return g;
}

ProjectionObservable make_observable(const ExperimentConfig& c, int n) {
  RVector w(static_cast<int>(c.observable.weights.size()));
  for (int i = 0; i < w.size(); ++i) w(i) = c.observable.weights[static_cast<std::size_t>(i)];
  if (c.observable.basis != "canonical")
    throw std::invalid_argument("observable basis '" + c.observable.basis + "' not supported");
  return canonical_observable(n, w);
}

std::string target_label(const TargetSpec& t) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_z_%g_%g", t.side == Side::Right ? "right" : "left",
                t.z.real(), t.z.imag());
  return buf;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- per-kind drivers ------------------------------------------------------

struct Collected {
  std::vector<std::vector<double>> per_target;  // [target][sample]
  int used = 0;
  int discarded = 0;
};

Collected collect_evec_stats(const ExperimentConfig& c, RunRecord& rec) {
  const EnsembleSpec spec = c.materialized_ensemble();
  const auto obs = make_observable(c, spec.dim);
  std::vector<Complex> zs;
  for (const auto& t : c.targets) zs.push_back(t.z);

  const int n_targets = static_cast<int>(c.targets.size());
  std::vector<std::vector<double>> values(n_targets,
                                          std::vector<double>(c.n_samples, 0.0));
  std::vector<char> ok(c.n_samples, 0);
  parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
    try {
      const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
      const SpectralSet set = eig_pairs(a);
      const auto picked = select_near(set, zs, c.epsilon);
      for (int t = 0; t < n_targets; ++t) {
        const CVector& vec = c.targets[t].side == Side::Right ? picked[t].u : picked[t].v;
        values[t][i] = projection_stat(obs, vec);
      }
      ok[i] = 1;
    } catch (const SeparationViolated&) {
    } catch (const DefectivePair&) {
    }
  });

  Collected col;
  col.per_target.resize(n_targets);
  for (int i = 0; i < c.n_samples; ++i) {
    if (!ok[i]) {
      ++col.discarded;
      continue;
    }
    ++col.used;
    for (int t = 0; t < n_targets; ++t) col.per_target[t].push_back(values[t][i]);
  }
  for (int t = 0; t < n_targets; ++t) {
    SampleSet s;
    s.label = target_label(c.targets[t]);
    s.values = col.per_target[t];
    Json meta;
    meta["N"] = spec.dim;
    meta["target"] = {{"re", c.targets[t].z.real()}, {"im", c.targets[t].z.imag()}};
    meta["side"] = c.targets[t].side == Side::Right ? "right" : "left";
    meta["weights"] = c.observable.weights;
    meta["master_seed"] = c.master_seed;
    s.metadata = meta.dump();
    rec.sample_sets.push_back(std::move(s));
  }
  return col;
}

void drive_evec_stats(const ExperimentConfig& c, RunRecord& rec, bool independence) {
  const Collected col = collect_evec_stats(c, rec);
  rec.used = col.used;
  rec.discarded = col.discarded;
  if (col.used == 0) {
    rec.aggregate["warning"] = "no samples";
    return;
  }
  RVector w(static_cast<int>(c.observable.weights.size()));
  for (int i = 0; i < w.size(); ++i) w(i) = c.observable.weights[static_cast<std::size_t>(i)];
  const LimitLaw law{w, w.size() == 1 ? LawKind::Exponential : LawKind::Hypoexponential};
  const double frob_sq = w.sum();

  Json per_target = Json::array();
  for (std::size_t t = 0; t < col.per_target.size(); ++t) {
    const auto& vals = col.per_target[t];
    Json jt;
    jt["label"] = target_label(c.targets[t]);
    jt["n"] = vals.size();
    jt["mean"] = pairwise_sum(vals) / static_cast<double>(vals.size());
    if (vals.size() >= 100) {
      const TestResult ks = ks_test(
          vals, [&](double x) { return limit_law_cdf(law, x); }, c.thresholds.ks, "ks-limit-law");
      const TestResult ks_gauss = ks_test(
          vals, [&](double x) { return gaussian_square_cdf(x, frob_sq); }, c.thresholds.ks,
          "ks-gaussian-square");
      jt["ks_limit_law"] = test_result_to_json(ks);
      jt["ks_gaussian_square"] = test_result_to_json(ks_gauss);
      jt["discrepancy_note"] =
          std::string("limit-law KS ") + (ks.pass ? "accepts" : "rejects") +
          "; one-dimensional Gaussian-square candidate KS distance " +
          std::to_string(ks_gauss.statistic);
    }
    per_target.push_back(jt);
  }
  rec.aggregate["per_target"] = per_target;

  if (independence && col.per_target.size() >= 2) {
    const IndependenceResult ind = independence_check(col.per_target[0], col.per_target[1],
                                                      c.thresholds.corr, c.thresholds.chi2_p);
    rec.aggregate["independence"] = {{"correlation", ind.correlation},
                                     {"corr_threshold", ind.corr_threshold},
                                     {"chi2", ind.chi2},
                                     {"chi2_p", ind.chi2_p},
                                     {"n", ind.n},
                                     {"pass", ind.pass}};
  }
}

void drive_mgf(const ExperimentConfig& c, RunRecord& rec) {
  const EnsembleSpec spec = c.materialized_ensemble();
  const int n = spec.dim;
  const double t = c.t_rule.t_of(n);
  const auto obs = make_observable(c, n);
  const TargetSpec target = c.targets.at(0);

  std::vector<double> lhs(c.n_samples, 0.0), rhs(c.n_samples, 0.0);
  std::vector<char> ok(c.n_samples, 0);
  parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
    try {
      Stream rng = derive_stream(spec.master_seed, static_cast<std::uint64_t>(i));
      const CMatrix a = draw_iid(spec.family, n, rng);
      const CMatrix mt = gaussian_divisible(a, t, false, rng);
      const SpectralSet set = eig_pairs(mt);
      const auto picked = select_near(set, {target.z}, c.epsilon);
      const CVector& vec = target.side == Side::Right ? picked[0].u : picked[0].v;
      lhs[i] = std::exp(c.q * projection_stat(obs, vec));

      // determinant side from the undeformed matrix at the sampled eigenvalue
      const Complex lambda = picked[0].lambda;
      const CMatrix shifted = a - lambda * CMatrix::Identity(n, n);
      const CMatrix gram = target.side == Side::Right ? CMatrix(shifted.adjoint() * shifted)
                                                      : CMatrix(shifted * shifted.adjoint());
      Eigen::SelfAdjointEigenSolver<CMatrix> sv(gram, Eigen::EigenvaluesOnly);
      const double eta = eta_zt(RVector(sv.eigenvalues().cwiseMax(0.0).cwiseSqrt()), t);
      Eigen::LLT<CMatrix> llt(gram + eta * eta * CMatrix::Identity(n, n));
      if (llt.info() != Eigen::Success) throw IllConditioned("mgf: Cholesky failed");
      const CMatrix hw = llt.solve(obs.vectors);
      const RVector sq = obs.weights.cwiseSqrt();
      const CMatrix small =
          CMatrix::Identity(obs.rank(), obs.rank()) -
          (t * c.q) * (sq.asDiagonal() * (obs.vectors.adjoint() * hw) * sq.asDiagonal());
      rhs[i] = 1.0 / small.determinant().real();
      ok[i] = 1;
    } catch (const SeparationViolated&) {
    } catch (const DefectivePair&) {
    }
  });

  std::vector<double> lhs_used, rhs_used;
  for (int i = 0; i < c.n_samples; ++i) {
    if (!ok[i]) {
      ++rec.discarded;
      continue;
    }
    lhs_used.push_back(lhs[i]);
    rhs_used.push_back(rhs[i]);
  }
  rec.used = static_cast<int>(lhs_used.size());
  if (rec.used == 0) {
    rec.aggregate["warning"] = "no samples";
    return;
  }
  const TestResult cmp = mean_compare(lhs_used, rhs_used, c.thresholds.mgf_se, "mgf-determinant");
  rec.aggregate["t"] = t;
  rec.aggregate["q"] = c.q;
  rec.aggregate["lhs_mean"] = pairwise_sum(lhs_used) / rec.used;
  rec.aggregate["rhs_mean"] = pairwise_sum(rhs_used) / rec.used;
  rec.aggregate["comparison"] = test_result_to_json(cmp);

  SampleSet sl;
  sl.label = "mgf_lhs";
  sl.values = lhs_used;
  sl.metadata = Json{{"N", n}, {"t", t}, {"q", c.q}}.dump();
  rec.sample_sets.push_back(std::move(sl));
  SampleSet sr;
  sr.label = "mgf_rhs_det";
  sr.values = rhs_used;
  sr.metadata = Json{{"N", n}, {"t", t}, {"q", c.q}}.dump();
  rec.sample_sets.push_back(std::move(sr));
}

void drive_scaling(const ExperimentConfig& c, RunRecord& rec) {
  const EnsembleSpec spec = c.materialized_ensemble();
  const int n = spec.dim;
  const RVector grid = eta_grid_of(c, n);
  const Complex z1 = c.targets.at(0).z;
  const Complex z2 = c.targets.size() > 1 ? c.targets[1].z : z1;

  if (c.kind == ExperimentKind::VerifyA1) {
    std::vector<std::vector<ScalingReport>> all(c.n_samples);
    parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
      const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
      all[i] = check_a1(a, z1, grid, c.thresholds.slope_tol, c.thresholds.c_max);
    });
    rec.used = c.n_samples;
    Json out = Json::array();
    const std::size_t n_rep = all.empty() ? 0 : all[0].size();
    for (std::size_t r = 0; r < n_rep; ++r) {
      std::vector<ScalingReport> column;
      for (int i = 0; i < c.n_samples; ++i) column.push_back(all[i][r]);
      ScalingReport merged = merge_scaling_reports(column);
      if (std::isnan(merged.target_slope)) merged.pass = merged.big_c_const <= c.thresholds.c_max;
      out.push_back(scaling_report_to_json(merged));
    }
    rec.aggregate["reports"] = out;
  } else if (c.kind == ExperimentKind::VerifyA2) {
    std::vector<std::vector<double>> cs(c.n_samples);
    parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
      const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
      std::vector<double> mins;
      for (int g = 0; g < grid.size(); ++g) {
        const ScalingReport r = check_a2(a, z1, z2, grid(g), grid(g));
        mins.push_back(r.c_const);
      }
      cs[i] = mins;
    });
    rec.used = c.n_samples;
    double cmin = 1e300;
    for (const auto& v : cs)
      for (double x : v) cmin = std::min(cmin, x);
    rec.aggregate["smallest_admissible_c"] = cmin;
    rec.aggregate["pass"] = cmin > 0.0;
  } else {  // VerifyA3
    const auto obs = make_observable(c, n);
    std::vector<double> maxima(c.n_samples, 0.0);
    parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
      const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
      double m = 0.0;
      for (int g = 0; g < grid.size(); ++g)
        for (const auto& r : check_a3_isotropic(a, z1, grid(g), obs, c.thresholds.c_max))
          m = std::max(m, r.big_c_const);
      maxima[i] = m;
    });
    rec.used = c.n_samples;
    const double worst = maxima.empty() ? 0.0 : *std::max_element(maxima.begin(), maxima.end());
    rec.aggregate["max_normalized_deviation"] = worst;
    rec.aggregate["pass"] = worst <= c.thresholds.c_max;
  }
}

void drive_rigidity_eth(const ExperimentConfig& c, RunRecord& rec) {
  const EnsembleSpec spec = c.materialized_ensemble();
  const int n = spec.dim;
  const Complex z = c.targets.at(0).z;
  const DensityProfile profile = quantiles(z, n);

  if (c.kind == ExperimentKind::Rigidity) {
    std::vector<RigidityReport> reports(c.n_samples);
    parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
      const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
      reports[i] = rigidity_deloc(sym_spectrum(a, z), profile, c.kappa);
    });
    rec.used = c.n_samples;
    int both = 0;
    double worst_r = 0.0, worst_d = 0.0;
    for (const auto& r : reports) {
      both += (r.pass_rigidity && r.pass_deloc) ? 1 : 0;
      worst_r = std::max(worst_r, r.max_rigidity);
      worst_d = std::max(worst_d, r.max_deloc);
    }
    const double frac = c.n_samples > 0 ? static_cast<double>(both) / c.n_samples : 1.0;
    rec.aggregate["pass_fraction"] = frac;
    rec.aggregate["max_rigidity"] = worst_r;
    rec.aggregate["max_deloc"] = worst_d;
    rec.aggregate["rigidity_threshold"] =
        reports.empty() ? 0.0 : reports[0].rigidity_threshold;
    rec.aggregate["deloc_threshold"] = reports.empty() ? 0.0 : reports[0].deloc_threshold;
    rec.aggregate["pass"] = frac >= c.thresholds.pass_fraction;
  } else {
    CMatrix y = CMatrix::Zero(2 * n, 2 * n);
    y.block(0, n, n, n) = CMatrix::Identity(n, n);  // F12 (x) I
    std::vector<EthReport> reports(c.n_samples);
    parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
      const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
      reports[i] = eth_check(sym_spectrum(a, z), profile, y, c.kappa);
    });
    rec.used = c.n_samples;
    int passed = 0;
    double worst_off = 0.0, worst_diag = 0.0;
    for (const auto& r : reports) {
      passed += r.pass ? 1 : 0;
      worst_off = std::max(worst_off, r.offdiag_max);
      worst_diag = std::max(worst_diag, r.diag_max);
    }
    const double frac = c.n_samples > 0 ? static_cast<double>(passed) / c.n_samples : 1.0;
    rec.aggregate["pass_fraction"] = frac;
    rec.aggregate["max_offdiag"] = worst_off;
    rec.aggregate["max_diag_excess"] = worst_diag;
    rec.aggregate["threshold"] = reports.empty() ? 0.0 : reports[0].threshold;
    rec.aggregate["pass"] = frac >= c.thresholds.pass_fraction;
  }
}

void drive_level_repulsion(const ExperimentConfig& c, RunRecord& rec) {
  const LevelRepulsionReport rep = level_repulsion(c.materialized_ensemble(), c.targets.at(0).z,
                                                   c.deltas, c.n_samples, c.threads);
  rec.used = rep.n_samples;
  Json pts = Json::array();
  for (const auto& p : rep.points)
    pts.push_back({{"delta", p.delta},
                   {"cutoff", p.cutoff},
                   {"frequency", p.frequency},
                   {"bound", p.bound},
                   {"se", p.standard_error},
                   {"pass", p.pass}});
  rec.aggregate["points"] = pts;
  rec.aggregate["pass"] = rep.pass;
}

void drive_jacobian(const ExperimentConfig& c, RunRecord& rec) {
  std::vector<int> ns = c.n_list.empty() ? std::vector<int>{2, 3} : c.n_list;
  const std::vector<std::pair<int, int>> shapes = {{1, 0}, {1, 1}};
  Json combos = Json::array();
  bool pass = true;
  for (int n : ns) {
    for (const auto& [mr, ml] : shapes) {
      if (mr + ml >= n) continue;
      std::vector<double> errs(c.n_samples, 0.0);
      parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
        Stream rng = derive_stream(c.master_seed,
                                   static_cast<std::uint64_t>((n * 8 + mr * 2 + ml) * 100000 + i));
        const DeflationChain chain = random_chain(n, mr, ml, rng);
        errs[i] = jacobian_fd_check(chain).rel_error;
      });
      const double worst = errs.empty() ? 0.0 : *std::max_element(errs.begin(), errs.end());

      // degenerate Vandermonde: collide two eigenvalues when available
      double degenerate_fd = 0.0;
      if (mr + ml >= 2) {
        Stream rng = derive_stream(c.master_seed, static_cast<std::uint64_t>(n * 977 + 13));
        DeflationChain chain = random_chain(n, mr, ml, rng);
        chain.steps[1].lambda = chain.steps[0].lambda;
        degenerate_fd = jacobian_fd_check(chain).fd_value;
      }
      const bool ok = worst <= c.thresholds.jac_rel &&
                      degenerate_fd <= c.thresholds.jac_degenerate_abs;
      pass = pass && ok;
      combos.push_back({{"N", n},
                        {"m_right", mr},
                        {"m_left", ml},
                        {"max_rel_error", worst},
                        {"degenerate_fd", degenerate_fd},
                        {"pass", ok}});
    }
  }
  rec.used = c.n_samples;
  rec.aggregate["combos"] = combos;
  rec.aggregate["pass"] = pass;
}

void drive_kq(const ExperimentConfig& c, RunRecord& rec) {
  std::vector<int> ns = c.n_list.empty() ? std::vector<int>{16, 32} : c.n_list;
  const TargetSpec target = c.targets.at(0);
  Json per_n = Json::array();
  std::vector<double> medians;
  for (int n : ns) {
    EnsembleSpec spec = c.materialized_ensemble();
    spec.dim = n;
    const double t = c.t_rule.t_of(n);
    const auto obs = make_observable(c, n);
    std::vector<double> gaps(c.n_samples, 0.0);
    parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
      Stream rng = derive_stream(spec.master_seed, static_cast<std::uint64_t>(n) * 1000003u + i);
      const CMatrix a = draw_iid(spec.family, n, rng);
      const CMatrix mt = gaussian_divisible(a, t, false, rng);
      Eigen::ComplexEigenSolver<CMatrix> es(mt, false);
      int best = 0;
      double bd = 1e300;
      for (int k = 0; k < n; ++k) {
        const double d = std::abs(es.eigenvalues()(k) - target.z);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      gaps[i] = std::abs(kq_ratio_check(a, es.eigenvalues()(best), t, c.q, obs).gap);
    });
    const double med = median_of(gaps);
    medians.push_back(med);
    per_n.push_back({{"N", n}, {"t", t}, {"median_abs_gap", med}});
  }
  rec.used = c.n_samples;
  bool decreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i)
    decreasing = decreasing && medians[i] < medians[i - 1];
  rec.aggregate["per_n"] = per_n;
  rec.aggregate["decreasing"] = decreasing;
  rec.aggregate["final_gap"] = medians.empty() ? 0.0 : medians.back();
  rec.aggregate["pass"] =
      decreasing && (medians.empty() || medians.back() <= c.thresholds.kq_gap);
}

void drive_dse_table(const ExperimentConfig& c, RunRecord& rec) {
  Json per_z = Json::array();
  for (const auto& t : c.targets) {
    const DensityProfile p = quantiles(t.z, c.ensemble.dim);
    double max_res = 0.0;
    for (int i = 0; i < p.e_grid.size(); ++i) {
      const DetEquivalent de = solve_mz(t.z, Complex(p.e_grid(i), 0.0));
      max_res = std::max(max_res, de.residual());
    }
    per_z.push_back({{"re", t.z.real()},
                     {"im", t.z.imag()},
                     {"edge", p.edge},
                     {"max_cubic_residual", max_res}});

    SampleSet rho_set;
    rho_set.label = "rho_" + target_label(t);
    rho_set.values.assign(p.rho.data(), p.rho.data() + p.rho.size());
    rho_set.metadata =
        Json{{"z", {t.z.real(), t.z.imag()}}, {"edge", p.edge}, {"column", "rho"}}.dump();
    rec.sample_sets.push_back(std::move(rho_set));
    SampleSet gamma_set;
    gamma_set.label = "gamma_" + target_label(t);
    gamma_set.values.assign(p.gamma_all.data(), p.gamma_all.data() + p.gamma_all.size());
    gamma_set.metadata =
        Json{{"z", {t.z.real(), t.z.imag()}}, {"N", c.ensemble.dim}, {"column", "gamma"}}.dump();
    rec.sample_sets.push_back(std::move(gamma_set));
  }
  rec.used = static_cast<int>(c.targets.size());
  rec.aggregate["profiles"] = per_z;
}

void drive_sample(const ExperimentConfig& c, RunRecord& rec) {
  const EnsembleSpec spec = c.materialized_ensemble();
  fs::create_directories(c.out_dir);
  std::vector<std::uint64_t> digests(c.n_samples, 0);
  parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
    const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
    char name[64];
    std::snprintf(name, sizeof(name), "sample_%06d.cmat", i);
    write_cmat((fs::path(c.out_dir) / name).string(), a);
    digests[i] = digest(a);
  });
  rec.used = c.n_samples;
  Json d = Json::array();
  for (auto x : digests) d.push_back(x);
  rec.aggregate["matrix_digests"] = d;
}

void drive_spectrum(const ExperimentConfig& c, RunRecord& rec) {
  const EnsembleSpec spec = c.materialized_ensemble();
  std::vector<double> min_biorth(c.n_samples, 0.0), max_oii(c.n_samples, 0.0);
  parallel_for_indexed(c.n_samples, c.threads, [&](int i) {
    const CMatrix a = sample_matrix(spec, static_cast<std::uint64_t>(i));
    const SpectralSet s = eig_pairs(a);
    double mb = 1e300;
    for (const auto& t : s.triples) mb = std::min(mb, std::abs(t.biorth));
    min_biorth[i] = mb;
    const CMatrix o = overlap_matrix(s);
    max_oii[i] = o.diagonal().real().maxCoeff();
  });
  rec.used = c.n_samples;
  rec.aggregate["min_biorth"] = min_biorth.empty()
                                    ? 0.0
                                    : *std::min_element(min_biorth.begin(), min_biorth.end());
  rec.aggregate["max_overlap_diag"] =
      max_oii.empty() ? 0.0 : *std::max_element(max_oii.begin(), max_oii.end());

  if (c.n_samples > 0) {
    const SpectralSet s = eig_pairs(sample_matrix(spec, 0));
    SampleSet re, im;
    re.label = "eigenvalues_re_sample0";
    im.label = "eigenvalues_im_sample0";
    for (const auto& t : s.triples) {
      re.values.push_back(t.lambda.real());
      im.values.push_back(t.lambda.imag());
    }
    re.metadata = im.metadata = Json{{"N", spec.dim}}.dump();
    rec.sample_sets.push_back(std::move(re));
    rec.sample_sets.push_back(std::move(im));
  }
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = config;
  rec.digest = config.config_digest();
  rec.aggregate = Json::object();

  if (config.n_samples == 0 && config.kind != ExperimentKind::DseTable &&
      config.kind != ExperimentKind::JacobianCheck) {
    rec.aggregate["warning"] = "no samples";
    rec.aggregate["pass"] = true;
  } else {
    switch (config.kind) {
      case ExperimentKind::Sample: drive_sample(config, rec); break;
      case ExperimentKind::Spectrum: drive_spectrum(config, rec); break;
      case ExperimentKind::VerifyA1:
      case ExperimentKind::VerifyA2:
      case ExperimentKind::VerifyA3: drive_scaling(config, rec); break;
      case ExperimentKind::Rigidity:
      case ExperimentKind::Eth: drive_rigidity_eth(config, rec); break;
      case ExperimentKind::LevelRepulsion: drive_level_repulsion(config, rec); break;
      case ExperimentKind::JacobianCheck: drive_jacobian(config, rec); break;
      case ExperimentKind::KqRatio: drive_kq(config, rec); break;
      case ExperimentKind::EvecStats: drive_evec_stats(config, rec, false); break;
      case ExperimentKind::Independence: drive_evec_stats(config, rec, true); break;
      case ExperimentKind::Mgf: drive_mgf(config, rec); break;
      case ExperimentKind::DseTable: drive_dse_table(config, rec); break;
    }
  }

  if (config.n_samples > 0 &&
      rec.discarded > config.discard_cap * static_cast<double>(config.n_samples))
    throw Error("run_experiment: discard cap exceeded (" + std::to_string(rec.discarded) + "/" +
                std::to_string(config.n_samples) + ")");

  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

void emit_report(const RunRecord& record, const std::string& out_dir) {
  const fs::path dir = out_dir.empty() ? fs::path(record.config.out_dir) : fs::path(out_dir);
  fs::create_directories(dir);

  {
    std::ofstream f(dir / "summary.json");
    f << record.to_json().dump(2) << "\n";
  }
  for (const auto& s : record.sample_sets) {
    std::ofstream f(dir / (s.label + ".csv"));
    f << "# " << s.metadata << "\n";
    f << "value\n";
    f.precision(17);
    for (double v : s.values) f << v << "\n";
  }
  // plot-ready tables
  if (record.aggregate.contains("reports")) {
    for (const auto& r : record.aggregate["reports"]) {
      std::ofstream f(dir / (r["quantity"].get<std::string>() + ".dat"));
      f.precision(17);
      const auto& grid = r["grid"];
      const auto& values = r["values"];
      for (std::size_t i = 0; i < grid.size() && i < values.size(); ++i)
        f << grid[i].get<double>() << " " << values[i].get<double>() << "\n";
    }
  }
  for (const auto& s : record.sample_sets) {
    if (s.values.empty()) continue;
    // ECDF with n+1 monotone steps, plus the fitted limit CDF overlay when
    // the set carries observable weights
    Json meta = Json::parse(s.metadata, nullptr, false);
    if (meta.is_discarded() || !meta.contains("weights")) continue;
    std::vector<double> sorted = s.values;
    std::sort(sorted.begin(), sorted.end());
    RVector w(static_cast<int>(meta["weights"].size()));
    for (int i = 0; i < w.size(); ++i) w(i) = meta["weights"][static_cast<std::size_t>(i)];
    const LimitLaw law{w, w.size() == 1 ? LawKind::Exponential : LawKind::Hypoexponential};
    std::ofstream f(dir / (s.label + "_ecdf.dat"));
    f.precision(17);
    const double n = static_cast<double>(sorted.size());
    f << sorted.front() << " 0 " << limit_law_cdf(law, sorted.front()) << "\n";
    for (std::size_t i = 0; i < sorted.size(); ++i)
      f << sorted[i] << " " << (i + 1) / n << " " << limit_law_cdf(law, sorted[i]) << "\n";
  }
}

}  // namespace evlab
