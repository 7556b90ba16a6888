#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "hmcgap/conductance.hpp"
#include "hmcgap/experiments.hpp"
#include "hmcgap/spectral.hpp"

namespace py = pybind11;
using namespace hmcgap;

namespace {

std::shared_ptr<const TargetDensity> target_from(const std::string& spec_json) {
    return make_target(Json::parse(spec_json));
}

Boundary boundary_from(const std::string& spec_json, std::size_t dim) {
    return spec_json.empty() ? default_boundary(dim) : make_boundary(Json::parse(spec_json), dim);
}

EstimatorConfig estimator(std::size_t n, std::uint64_t seed, unsigned workers) {
    EstimatorConfig c;
    c.n = n;
    c.seed = seed;
    c.workers = workers;
    return c;
}

py::dict conductance_dict(const ConductanceEstimate& e) {
    py::dict d;
    d["phi"] = e.phi;
    d["se"] = e.std_error;
    d["method"] = to_string(e.method);
    d["n"] = e.n_samples;
    d["resamples"] = e.resample_count;
    if (e.flux_plus) d["flux_plus"] = *e.flux_plus;
    if (e.odd_probability) d["odd_probability"] = *e.odd_probability;
    if (e.pi_S) d["pi_S"] = *e.pi_S;
    if (e.mean_crossings) d["mean_crossings"] = *e.mean_crossings;
    d["warnings"] = e.warnings;
    return d;
}

}  // namespace

PYBIND11_MODULE(_hmcgap, m) {
    m.doc() = "Native core of hmcgap; targets and boundaries are passed as JSON strings.";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<IntegratorFailure>(m, "IntegratorFailure", PyExc_RuntimeError);

    m.def("build_id", &build_id);
    m.def("experiment_names", &experiment_names);
    m.def("experiment_help", &experiment_help);

    m.def(
        "run_experiment",
        [](const std::string& name, const std::string& config_json) {
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(name, Json::parse(config_json));
            }
            py::list checks;
            for (const auto& c : r.checks) checks.append(py::make_tuple(c.name, c.passed, c.detail));
            return py::make_tuple(r.table.csv(), r.sidecar.dump(), checks);
        },
        py::arg("name"), py::arg("config_json"),
        "Returns (csv, sidecar_json, [(check, passed, detail), ...]).");

    m.def(
        "exact_flow_gaussian",
        [](double q, double p, double T) {
            const auto x = exact_flow_gaussian(q, p, T);
            return py::make_tuple(x.q[0], x.p[0]);
        },
        py::arg("q"), py::arg("p"), py::arg("T"));

    m.def(
        "flow",
        [](const std::string& target, std::vector<double> q, std::vector<double> p, double T, bool force_numeric) {
            const auto sys = HamiltonianSystem::isotropic(target_from(target));
            FlowConfig cfg;
            cfg.force_numeric = force_numeric;
            const auto end = flow(sys, {std::move(q), std::move(p)}, T, cfg).end();
            return py::make_tuple(end.q, end.p);
        },
        py::arg("target"), py::arg("q"), py::arg("p"), py::arg("T"), py::arg("force_numeric") = false);

    m.def("log_density", [](const std::string& target, std::vector<double> q) {
        return target_from(target)->log_density(q);
    });

    m.def(
        "parity_conductance",
        [](const std::string& target, double T, std::size_t n, std::uint64_t seed, const std::string& boundary,
           unsigned workers) {
            const auto t = target_from(target);
            py::gil_scoped_release release;
            const auto e = parity_conductance(HamiltonianSystem::isotropic(t), boundary_from(boundary, t->dim()), T,
                                              estimator(n, seed, workers));
            py::gil_scoped_acquire acquire;
            return conductance_dict(e);
        },
        py::arg("target"), py::arg("T"), py::arg("n") = 100000, py::arg("seed") = 0, py::arg("boundary") = "",
        py::arg("workers") = 0);

    m.def(
        "direct_conductance",
        [](const std::string& target, double T, std::size_t n, std::uint64_t seed, const std::string& boundary,
           unsigned workers) {
            const auto t = target_from(target);
            py::gil_scoped_release release;
            const auto e = direct_conductance(HmcKernel(t, {T}), boundary_from(boundary, t->dim()), n, seed, workers);
            py::gil_scoped_acquire acquire;
            return conductance_dict(e);
        },
        py::arg("target"), py::arg("T"), py::arg("n") = 100000, py::arg("seed") = 0, py::arg("boundary") = "",
        py::arg("workers") = 0);

    m.def(
        "flux_bound",
        [](const std::string& target, double T, const std::string& boundary) {
            const auto t = target_from(target);
            const auto b = corollary1_bound(HamiltonianSystem::isotropic(t), boundary_from(boundary, t->dim()), T);
            py::dict d;
            d["paper_half"] = b.paper_half;
            d["normal_mean_positive"] = b.normal_mean_positive;
            d["pi_S"] = b.pi_S;
            return d;
        },
        py::arg("target"), py::arg("T"), py::arg("boundary") = "");

    m.def(
        "spectral_gap",
        [](const std::string& target, const std::string& kernel, double param, std::size_t bins) {
            const auto t = target_from(target);
            if (t->dim() != 1) throw ConfigError("spectral_gap: one-dimensional targets only");
            py::gil_scoped_release release;
            const auto grid = Grid1D::for_target(*t, bins);
            TransitionMatrix mat;
            if (kernel == "hmc")
                mat = hmc_kernel_matrix(*t, param, grid);
            else if (kernel == "rwm")
                mat = rwm_kernel_matrix(*t, param, grid);
            else
                throw ConfigError("spectral_gap: kernel must be hmc or rwm");
            return spectral_gap(mat).gap;
        },
        py::arg("target"), py::arg("kernel"), py::arg("param"), py::arg("bins") = 400);
}
