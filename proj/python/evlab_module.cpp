#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evlab/changevar.hpp"
#include "evlab/divided_difference.hpp"
#include "evlab/dse.hpp"
#include "evlab/ensemble.hpp"
#include "evlab/harness.hpp"
#include "evlab/hermitization.hpp"
#include "evlab/locallaw.hpp"
#include "evlab/spectral.hpp"
#include "evlab/stats.hpp"

namespace py = pybind11;
using namespace evlab;

namespace {

ProjectionObservable make_obs(const RVector& weights, const py::object& vectors, int dim) {
  if (vectors.is_none()) return canonical_observable(dim, weights);
  return ProjectionObservable(weights, vectors.cast<CMatrix>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "eigenvector statistics laboratory for complex i.i.d. matrices";

  // ---- ensembles ----
  py::class_<EnsembleSpec>(m, "EnsembleSpec")
      .def(py::init([](const std::string& family, int dim, std::uint64_t master_seed, double t,
                       bool normalize_1plust) {
             return EnsembleSpec{family_from_string(family), dim, master_seed, t,
                                 normalize_1plust};
           }),
           py::arg("family") = "ginibre-complex", py::arg("dim") = 64,
           py::arg("master_seed") = 0, py::arg("t") = 0.0,
           py::arg("normalize_1plust") = false)
      .def_readwrite("dim", &EnsembleSpec::dim)
      .def_readwrite("master_seed", &EnsembleSpec::master_seed)
      .def_readwrite("t", &EnsembleSpec::t)
      .def_readwrite("normalize_1plust", &EnsembleSpec::normalize_1plust)
      .def_property(
          "family", [](const EnsembleSpec& s) { return to_string(s.family); },
          [](EnsembleSpec& s, const std::string& f) { s.family = family_from_string(f); });

  m.def("sample_iid", &sample_iid, py::arg("spec"), py::arg("sample_index"));
  m.def("sample_matrix", &sample_matrix, py::arg("spec"), py::arg("sample_index"));
  m.def(
      "gaussian_divisible",
      [](const CMatrix& a, double t, bool normalize, std::uint64_t seed,
         std::uint64_t index) {
        Stream rng = derive_stream(seed, index);
        return gaussian_divisible(a, t, normalize, rng);
      },
      py::arg("a"), py::arg("t"), py::arg("normalize") = false, py::arg("seed") = 0,
      py::arg("index") = 0);
  m.def("write_cmat", &write_cmat, py::arg("path"), py::arg("matrix"));
  m.def("read_cmat", &read_cmat, py::arg("path"));

  // ---- spectral ----
  m.def(
      "eig_pairs",
      [](const CMatrix& a) {
        const SpectralSet s = eig_pairs(a);
        const int n = static_cast<int>(s.triples.size());
        CVector lambdas(n), biorth(n);
        CMatrix u(a.rows(), n), v(a.rows(), n);
        for (int i = 0; i < n; ++i) {
          lambdas(i) = s.triples[i].lambda;
          biorth(i) = s.triples[i].biorth;
          u.col(i) = s.triples[i].u;
          v.col(i) = s.triples[i].v;
        }
        py::dict d;
        d["lambda"] = lambdas;
        d["u"] = u;
        d["v"] = v;
        d["biorth"] = biorth;
        return d;
      },
      py::arg("a"), "Paired right/left eigendecomposition (v* u real positive).");
  m.def(
      "overlap_matrix", [](const CMatrix& a) { return overlap_matrix(eig_pairs(a)); },
      py::arg("a"));
  m.def(
      "projection_stat",
      [](const RVector& weights, const py::object& vectors, const CVector& x) {
        return projection_stat(make_obs(weights, vectors, static_cast<int>(x.size())), x);
      },
      py::arg("weights"), py::arg("vectors"), py::arg("x"));

  // ---- hermitization ----
  m.def("hermitize", &hermitize, py::arg("a"), py::arg("z"));
  m.def(
      "sym_spectrum",
      [](const CMatrix& a, Complex z) {
        const SymSpectrum s = sym_spectrum(a, z);
        py::dict d;
        d["xi"] = s.xi_all();
        d["vecs"] = s.vecs_all();
        return d;
      },
      py::arg("a"), py::arg("z"),
      "All 2N Hermitization eigenpairs, ascending (chiral symmetry enforced).");
  m.def(
      "resolvents",
      [](const CMatrix& a, Complex z, double eta) {
        const ResolventBundle b = resolvents(a, z, eta);
        py::dict d;
        d["h"] = b.h;
        d["htilde"] = b.htilde;
        d["g"] = b.g();
        return d;
      },
      py::arg("a"), py::arg("z"), py::arg("eta"));
  m.def(
      "trace_functionals",
      [](const CMatrix& a, Complex z, double eta) {
        const SingleShiftTraces t = trace_functionals(resolvents(a, z, eta));
        py::dict d;
        d["h"] = t.h;
        d["hht"] = t.hht;
        d["h2"] = t.h2;
        d["h2az"] = t.h2az;
        d["g12_21"] = t.g12_21;
        return d;
      },
      py::arg("a"), py::arg("z"), py::arg("eta"));
  m.def(
      "v_functional",
      [](const CMatrix& a, Complex z, const RVector& weights, const py::object& vectors,
         const std::string& side, double delta_v) {
        const VResult v =
            v_functional(a, z, make_obs(weights, vectors, static_cast<int>(a.rows())),
                         side == "left" ? Side::Left : Side::Right, delta_v);
        py::dict d;
        d["value"] = v.value;
        d["trace_form"] = v.trace_form;
        d["eta_v"] = v.eta_v;
        return d;
      },
      py::arg("a"), py::arg("z"), py::arg("weights"), py::arg("vectors") = py::none(),
      py::arg("side") = "right", py::arg("delta_v") = 0.1);

  // ---- deterministic equivalents ----
  m.def(
      "solve_mz", [](Complex z, Complex w) { return solve_mz(z, w).m; }, py::arg("z"),
      py::arg("w"));
  m.def("rho_z", &rho_z, py::arg("z"), py::arg("e"));
  m.def("support_edge", &support_edge, py::arg("z"));
  m.def(
      "quantiles",
      [](Complex z, int n) {
        const DensityProfile p = quantiles(z, n);
        py::dict d;
        d["edge"] = p.edge;
        d["e_grid"] = p.e_grid;
        d["rho"] = p.rho;
        d["gamma"] = p.gamma_all;
        return d;
      },
      py::arg("z"), py::arg("n"));
  m.def("kappa_bulk", &kappa_bulk, py::arg("z"), py::arg("kappa"));
  m.def(
      "eta_zt",
      [](const RVector& xi_positive, double t) { return eta_zt(xi_positive, t); },
      py::arg("xi_positive"), py::arg("t"));

  // ---- change of variables ----
  py::class_<DeflationStep>(m, "DeflationStep")
      .def_property_readonly("side",
                             [](const DeflationStep& s) {
                               return s.side == Side::Right ? "right" : "left";
                             })
      .def_readonly("lam", &DeflationStep::lambda)
      .def_readonly("sphere_point", &DeflationStep::sphere_point)
      .def_readonly("w", &DeflationStep::w);
  py::class_<DeflationChain>(m, "DeflationChain")
      .def_readonly("steps", &DeflationChain::steps)
      .def_readonly("residual", &DeflationChain::residual);

  m.def("householder", &householder, py::arg("u"));
  m.def("phi_forward", &phi_forward, py::arg("chain"));
  m.def(
      "deflate",
      [](const CMatrix& a, const std::vector<Complex>& selected,
         const std::vector<std::string>& sides) {
        std::vector<Side> s;
        for (const auto& x : sides) s.push_back(x == "left" ? Side::Left : Side::Right);
        return deflate(a, selected, s);
      },
      py::arg("a"), py::arg("selected"), py::arg("sides"));
  m.def(
      "random_chain",
      [](int n, int m_right, int m_left, std::uint64_t seed) {
        Stream rng = derive_stream(seed, 0);
        return random_chain(n, m_right, m_left, rng);
      },
      py::arg("n"), py::arg("m_right"), py::arg("m_left"), py::arg("seed") = 0);
  m.def(
      "jacobian_fd_check",
      [](const DeflationChain& chain, double h) {
        const JacobianCheck jc = jacobian_fd_check(chain, h);
        py::dict d;
        d["fd_value"] = jc.fd_value;
        d["formula_value"] = jc.formula_value;
        d["rel_error"] = jc.rel_error;
        return d;
      },
      py::arg("chain"), py::arg("h") = 1e-6);
  m.def(
      "evec_reconstruct",
      [](const DeflationStep& step, Complex lam, const CVector& x, const std::string& side) {
        return evec_reconstruct(step, lam, x, side == "left" ? Side::Left : Side::Right);
      },
      py::arg("step"), py::arg("lam"), py::arg("x"), py::arg("vector_side") = "right");
  m.def("log_sphere_exp_integral", &log_sphere_exp_integral, py::arg("b"),
        "log E[exp(-u* B u)] over the uniform complex unit sphere, Hermitian B.");
  m.def(
      "kq_ratio_check",
      [](const CMatrix& a, Complex lam, double t, double q, const RVector& weights,
         const py::object& vectors) {
        const KqRatio r = kq_ratio_check(
            a, lam, t, q, make_obs(weights, vectors, static_cast<int>(a.rows())));
        py::dict d;
        d["log_ratio"] = r.log_ratio;
        d["log_det"] = r.log_det;
        d["gap"] = r.gap;
        d["eta"] = r.eta;
        return d;
      },
      py::arg("a"), py::arg("lam"), py::arg("t"), py::arg("q"), py::arg("weights"),
      py::arg("vectors") = py::none());

  // ---- statistics ----
  m.def(
      "limit_law_cdf",
      [](const RVector& weights, double x) {
        return limit_law_cdf({weights, LawKind::Hypoexponential}, x);
      },
      py::arg("weights"), py::arg("x"));
  m.def(
      "limit_law_mgf",
      [](const RVector& weights, double s) {
        return limit_law_mgf({weights, LawKind::Hypoexponential}, s);
      },
      py::arg("weights"), py::arg("s"));
  m.def("gaussian_square_cdf", &gaussian_square_cdf, py::arg("x"), py::arg("frob_sq"));
  m.def(
      "ks_test",
      [](const std::vector<double>& samples, const RVector& weights, double threshold) {
        const TestResult r =
            ks_test(SampleSet{"samples", samples, "{}"},
                    LimitLaw{weights, LawKind::Hypoexponential}, threshold);
        py::dict d;
        d["statistic"] = r.statistic;
        d["threshold"] = r.threshold;
        d["pass"] = r.pass;
        d["p_value"] = r.p_value;
        return d;
      },
      py::arg("samples"), py::arg("weights"), py::arg("threshold") = 0.05);
  m.def(
      "independence_check",
      [](const std::vector<double>& xs, const std::vector<double>& ys, double corr_threshold,
         double min_p) {
        const IndependenceResult r = independence_check(xs, ys, corr_threshold, min_p);
        py::dict d;
        d["correlation"] = r.correlation;
        d["chi2"] = r.chi2;
        d["chi2_p"] = r.chi2_p;
        d["pass"] = r.pass;
        return d;
      },
      py::arg("xs"), py::arg("ys"), py::arg("corr_threshold") = 0.05,
      py::arg("min_p") = 0.01);
  m.def("ginue_correlation", &ginue_correlation, py::arg("points"));

  // ---- harness ----
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig c = ExperimentConfig::from_json(Json::parse(config_json));
        return run_experiment(c).to_json().dump(2);
      },
      py::arg("config_json"),
      "Run an experiment described by an ExperimentConfig JSON string; returns the record.");
  m.def(
      "run_and_emit",
      [](const std::string& config_json, const std::string& out_dir) {
        const ExperimentConfig c = ExperimentConfig::from_json(Json::parse(config_json));
        const RunRecord r = run_experiment(c);
        emit_report(r, out_dir);
        return r.to_json().dump(2);
      },
      py::arg("config_json"), py::arg("out_dir"));
  m.def("default_config", []() { return ExperimentConfig().to_json().dump(2); });
}
