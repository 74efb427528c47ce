#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evlab/common.hpp"
#include "evlab/ensemble.hpp"
#include "evlab/locallaw.hpp"
#include "evlab/stats.hpp"

namespace evlab {

using Json = nlohmann::ordered_json;

enum class ExperimentKind {
  Sample,
  Spectrum,
  VerifyA1,
  VerifyA2,
  VerifyA3,
  Rigidity,
  Eth,
  LevelRepulsion,
  JacobianCheck,
  KqRatio,
  EvecStats,
  Mgf,
  Independence,
  DseTable,
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct TargetSpec {
  Complex z;
  Side side = Side::Right;
};

struct ObservableSpec {
  std::vector<double> weights = {1.0};
  std::string basis = "canonical";  // canonical: w_k = e_k
};

/// t as a function of N: fixed value, or N^(-1/3 + value).
struct TRule {
  std::string mode = "fixed";  // "fixed" | "power"
  double value = 0.0;
  double t_of(int n) const;
};

struct Thresholds {
  double ks = 0.05;
  double ks_reject = 0.10;  // wrong-candidate discrimination floor
  double corr = 0.05;
  double chi2_p = 0.01;
  double mgf_se = 3.0;
  double slope_tol = 0.15;
  double c_max = 10.0;
  double jac_rel = 1e-4;
  double jac_degenerate_abs = 1e-6;
  double kq_gap = 0.1;
  double pass_fraction = 0.95;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::EvecStats;
  EnsembleSpec ensemble{Family::GinibreComplex, 64, 0, 0.0, false};
  std::vector<int> n_list;  // multi-N experiments (kq-ratio, jacobian-check)
  TRule t_rule;
  std::vector<TargetSpec> targets = {{Complex(0.0, 0.0), Side::Right}};
  ObservableSpec observable;
  double delta_v = 0.1;
  std::vector<double> deltas = {0.05, 0.1, 0.2};
  double kappa = 1e-3;
  double epsilon = 0.1;  // separation exponent in select_near
  double q = -1.0;
  std::vector<double> s_grid = {-1.0, -0.5, -0.1};
  double eta_min_exp = -1.0 / 3.0;  // eta grid lower end N^exp
  double eta_max = 1.0;
  int eta_points = 12;
  int n_samples = 100;
  double discard_cap = 0.05;
  Thresholds thresholds;
  std::string out_dir = "out";
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  Json to_json() const;
  static ExperimentConfig from_json(const Json& j);
  std::uint64_t config_digest() const;
  /// Ensemble spec with the run seed filled in.
  EnsembleSpec materialized_ensemble() const;
};

struct RunRecord {
  ExperimentConfig config;
  std::uint64_t digest = 0;
  int used = 0;
  int discarded = 0;
  Json aggregate;
  std::vector<SampleSet> sample_sets;
  double wall_ms = 0.0;
  std::string version = "0.1.0";

  Json to_json() const;
  std::string aggregate_dump() const { return aggregate.dump(2); }
};

/// Dispatches on config.kind, parallel over sample indices with per-index
/// streams, merging in index order. Per-sample SeparationViolated and
/// DefectivePair are counted and excluded; exceeding discard_cap fails the run.
RunRecord run_experiment(const ExperimentConfig& config);

/// summary JSON, raw sample CSVs, and whitespace .dat plot tables.
void emit_report(const RunRecord& record, const std::string& out_dir = "");

/// Work queue over [0, n) with deterministic per-index work; rethrows the
/// first worker exception after joining.
void parallel_for_indexed(int n, int threads, const std::function<void(int)>& fn);

/// Pairwise (cascade) summation over an index-ordered buffer.
double pairwise_sum(const std::vector<double>& v);

Json scaling_report_to_json(const ScalingReport& r);
Json test_result_to_json(const TestResult& r);

}  // namespace evlab
