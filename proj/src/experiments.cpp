#include "hmcgap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

#include "hmcgap/conductance.hpp"
#include "hmcgap/parallel.hpp"
#include "hmcgap/samplers.hpp"
#include "hmcgap/spectral.hpp"
#include "hmcgap/stats.hpp"

#ifndef HMCGAP_BUILD_ID
#define HMCGAP_BUILD_ID "unknown"
#endif
#ifndef HMCGAP_VERSION
#define HMCGAP_VERSION "0.0.0"
#endif

namespace hmcgap {

std::string build_id() { return HMCGAP_BUILD_ID; }

// ---------------------------------------------------------------------------------------------
// Table

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("Table: row width does not match the header");
    rows.push_back(std::move(row));
}

namespace {

std::string format_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>) {
                return "";
            } else if constexpr (std::is_same_v<V, double>) {
                if (std::isnan(v)) return "";
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                return buf;
            } else if constexpr (std::is_same_v<V, long long>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<V, bool>) {
                return v ? "true" : "false";
            } else {
                if (v.find_first_of(",\"\n") == std::string::npos) return v;
                std::string q = "\"";
                for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                return q + "\"";
            }
        },
        c);
}

Json cell_json(const Cell& c) {
    return std::visit(
        [](const auto& v) -> Json {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>) {
                return nullptr;
            } else if constexpr (std::is_same_v<V, double>) {
                return std::isfinite(v) ? Json(v) : Json(nullptr);
            } else {
                return v;
            }
        },
        c);
}

}  // namespace

std::string Table::csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
        out += "\n";
    }
    return out;
}

const Cell& Table::at(std::size_t row, const std::string& column) const {
    const auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) throw std::out_of_range("Table: no column " + column);
    return rows.at(row)[static_cast<std::size_t>(it - columns.begin())];
}

double Table::number(std::size_t row, const std::string& column) const {
    const auto& c = at(row, column);
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
    return std::nan("");
}

bool ExperimentResult::all_checks_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

constexpr double kPi = std::numbers::pi;
const double kNaN = std::nan("");

// Typed access to a validated config object with defaults.
class Reader {
public:
    Reader(const Json& config, const std::string& experiment, std::vector<std::string> allowed) : c_(config) {
        if (c_.is_null()) c_ = Json::object();
        allowed.insert(allowed.end(), {"experiment", "seed", "workers", "flow"});
        require_keys(c_, allowed, experiment + " config");
        if (c_.contains("experiment") && c_.at("experiment") != experiment)
            throw ConfigError("config is for experiment \"" + c_.at("experiment").dump() + "\", not " + experiment);
    }

    bool has(const std::string& key) const { return c_.contains(key) && !c_.at(key).is_null(); }
    const Json& raw(const std::string& key) const { return c_.at(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError("missing \"" + key + "\"");
        }
        const auto v = number_list(c_.at(key), key);
        if (v.size() != 1) throw ConfigError("\"" + key + "\" must be a single number");
        return v[0];
    }

    std::vector<double> list(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError("missing \"" + key + "\"");
        }
        auto v = number_list(c_.at(key), key);
        if (v.empty()) throw ConfigError("\"" + key + "\" must not be empty");
        return v;
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const double x = number(key);
        if (x < 0 || x != std::floor(x) || x > 1.8e19) throw ConfigError("\"" + key + "\" must be a nonnegative integer");
        return static_cast<std::uint64_t>(x);
    }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!c_.at(key).is_boolean()) throw ConfigError("\"" + key + "\" must be true or false");
        return c_.at(key).get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback, const std::vector<std::string>& choices) const {
        std::string v = fallback;
        if (has(key)) {
            if (!c_.at(key).is_string()) throw ConfigError("\"" + key + "\" must be a string");
            v = c_.at(key).get<std::string>();
        }
        if (std::find(choices.begin(), choices.end(), v) == choices.end())
            throw ConfigError("\"" + key + "\": unsupported value \"" + v + "\"");
        return v;
    }

    std::uint64_t seed() const { return count("seed", 0); }
    unsigned workers() const { return static_cast<unsigned>(count("workers", 0)); }
    FlowConfig flow() const { return make_flow_config(has("flow") ? c_.at("flow") : Json()); }
    const Json& json() const { return c_; }

    std::shared_ptr<const TargetDensity> target(std::optional<Json> fallback = std::nullopt) const {
        if (!has("target")) {
            if (fallback) return make_target(*fallback);
            throw ConfigError("missing \"target\"");
        }
        return make_target(c_.at("target"));
    }

    Boundary boundary(std::size_t dim) const {
        return has("boundary") ? make_boundary(c_.at("boundary"), dim) : default_boundary(dim);
    }

private:
    Json c_;
};

ExperimentResult start(const std::string& name, const Reader& r, std::vector<std::string> columns) {
    ExperimentResult out;
    out.experiment = name;
    out.table.columns = std::move(columns);
    const auto flow = r.flow();
    out.sidecar = Json::object();
    out.sidecar["experiment"] = name;
    out.sidecar["config"] = r.json();
    out.sidecar["provenance"] = {
        {"build_id", build_id()},
        {"version", HMCGAP_VERSION},
        {"seed", r.seed()},
        {"workers", r.workers()},
        {"tolerances",
         {{"energy_tol", flow.energy_tolerance},
          {"max_step", flow.max_step},
          {"rel_tol", flow.rel_tol},
          {"abs_tol", flow.abs_tol},
          {"refine_tol", EstimatorConfig{}.refine_tol}}},
    };
    return out;
}

void finish(ExperimentResult& out) {
    Json metrics = Json::object();
    for (const auto& [k, v] : out.table.uncertainty) metrics[k] = v;
    out.sidecar["metrics"] = metrics;
    Json checks = Json::array();
    for (const auto& c : out.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    out.sidecar["checks"] = checks;
    out.sidecar["warnings"] = out.warnings;
    Json rows = Json::array();
    for (const auto& row : out.table.rows) {
        Json obj = Json::object();
        for (std::size_t i = 0; i < row.size(); ++i) obj[out.table.columns[i]] = cell_json(row[i]);
        rows.push_back(obj);
    }
    out.sidecar["rows"] = rows;
}

std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& x : items) s += (s.empty() ? "" : ";") + x;
    return s;
}

void add_check(ExperimentResult& out, std::string name, bool passed, std::string detail) {
    out.checks.push_back({std::move(name), passed, std::move(detail)});
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

bool near(double x, double y) { return std::abs(x - y) < 1e-12; }

EstimatorConfig estimator(const Reader& r, std::size_t n) {
    EstimatorConfig c;
    c.n = n;
    c.seed = r.seed();
    c.workers = r.workers();
    c.flow = r.flow();
    return c;
}

std::shared_ptr<const MetricField> make_metric(const Reader& r, std::size_t dim) {
    if (!r.has("metric")) return std::make_shared<IdentityMetric>(dim);
    const Json& m = r.raw("metric");
    require_keys(m, {"kind", "matrix"}, "metric");
    const std::string kind = m.value("kind", "identity");
    if (kind == "identity") return std::make_shared<IdentityMetric>(dim);
    if (kind != "constant") throw ConfigError("metric: unknown kind \"" + kind + "\"");
    if (!m.contains("matrix") || !m.at("matrix").is_array() || m.at("matrix").size() != dim)
        throw ConfigError("metric: \"matrix\" must be a dim x dim array");
    Eigen::MatrixXd G(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const auto row = number_list(m.at("matrix").at(i), "metric.matrix");
        if (row.size() != dim) throw ConfigError("metric: \"matrix\" must be a dim x dim array");
        for (std::size_t j = 0; j < dim; ++j) G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    try {
        return std::make_shared<ConstantMetric>(G);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("metric: ") + e.what());
    }
}

// Markov kernel from "kernel" plus T / epsilon (a single value of each).
std::shared_ptr<const MarkovKernel> make_kernel(const Reader& r, const std::shared_ptr<const TargetDensity>& target,
                                                const std::string& kind, double param) {
    if (!(param > 0.0)) throw ConfigError(kind == "rwm" ? "\"epsilon\" must be positive" : "\"T\" must be positive");
    if (kind == "rwm") return std::make_shared<RwmKernel>(target, RwmConfig{param});
    if (kind == "hmc") return std::make_shared<HmcKernel>(target, HmcConfig{param, r.flow()});
    RhmcConfig rc;
    rc.T = param;
    rc.flow = r.flow();
    return std::make_shared<RhmcKernel>(target, make_metric(r, target->dim()), rc);
}

double odd_count(const ConductanceEstimate& e) {
    return std::round(e.odd_probability.value_or(0.0) * static_cast<double>(e.n_samples));
}

// ---------------------------------------------------------------------------------------------
// conductance

}  // namespace

ExperimentResult run_conductance(const Json& config) {
    const Reader r(config, "conductance", {"target", "boundary", "T", "method", "kernel", "epsilon", "n", "metric"});
    const auto target = r.target();
    const auto S = r.boundary(target->dim());
    const auto method = r.text("method", "parity", {"parity", "direct", "flux"});
    const auto kernel_kind = r.text("kernel", "hmc", {"hmc", "rwm", "rhmc"});
    const auto n = r.count("n", 100000);
    if (n == 0) throw ConfigError("\"n\" must be >= 1");
    if (method != "direct" && kernel_kind != "hmc") throw ConfigError("parity and flux methods need the hmc kernel");
    const bool rwm = kernel_kind == "rwm";
    const auto params = rwm ? r.list("epsilon") : r.list("T");

    auto out = start("conductance", r,
                     {"method", "kernel", "T", "epsilon", "phi", "se", "phi_plus_half", "phi_plus_corrected", "pi_S",
                      "n", "resamples", "identity_residual", "warnings"});
    out.table.uncertainty = {{"phi", method == "flux" ? "deterministic" : "se"},
                             {"phi_plus_half", "deterministic"},
                             {"phi_plus_corrected", "deterministic"},
                             {"pi_S", "deterministic"}};
    const auto system = HamiltonianSystem::isotropic(target);
    for (double p : params) {
        if (!(p >= 0.0)) throw ConfigError("T and epsilon values must be >= 0");
        std::vector<std::string> warn;
        Cell half, corrected, residual;
        const double pi_S = set_mass(*target, S);
        if (!rwm) {
            const auto b = corollary1_bound(system, S, p);
            half = b.paper_half * b.pi_S;
            corrected = b.normal_mean_positive * b.pi_S;
        }
        double phi = kNaN, se = kNaN;
        std::size_t used = n, resamples = 0;
        if (method == "parity") {
            const auto est = parity_conductance(system, S, p, estimator(r, n));
            phi = est.phi;
            se = est.std_error;
            resamples = est.resample_count;
            residual = *est.identity_residual;
            warn = est.warnings;
            add_check(out, "parity identity at T=" + fmt(p), *est.identity_residual <= 1e-12,
                      "residual " + fmt(*est.identity_residual));
            const double ceiling = std::get<double>(corrected) / pi_S;
            add_check(out, "flux ceiling at T=" + fmt(p), phi <= ceiling + 3.0 * se,
                      "phi " + fmt(phi) + " vs bound " + fmt(ceiling));
        } else if (method == "direct") {
            const auto k = make_kernel(r, target, kernel_kind, p);
            const auto est = direct_conductance(*k, S, n, r.seed(), r.workers());
            phi = est.phi;
            se = est.std_error;
            used = est.n_samples;
        } else {
            phi = std::get<double>(corrected) / pi_S;
        }
        out.table.add_row({method, kernel_kind, rwm ? Cell{} : Cell{p}, rwm ? Cell{p} : Cell{}, phi,
                           method == "flux" ? Cell{} : Cell{se}, half, corrected, pi_S, static_cast<long long>(used),
                           static_cast<long long>(resamples), residual, join(warn)});
        for (const auto& w : warn) out.warnings.push_back(w);
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// flux

ExperimentResult run_flux(const Json& config) {
    const Reader r(config, "flux", {"target", "boundary", "T", "n"});
    const auto target = r.target();
    const auto S = r.boundary(target->dim());
    const auto n = r.count("n", 1000000);
    if (n == 0) throw ConfigError("\"n\" must be >= 1");
    const auto system = HamiltonianSystem::isotropic(target);
    auto out = start("flux", r,
                     {"T", "phi_plus_mc", "se", "phi_plus_corrected", "phi_plus_half", "mc_over_corrected",
                      "half_over_corrected"});
    out.table.uncertainty = {{"phi_plus_mc", "se"},
                             {"phi_plus_corrected", "deterministic"},
                             {"phi_plus_half", "deterministic"}};
    for (double T : r.list("T")) {
        if (!(T >= 0.0)) throw ConfigError("T values must be >= 0");
        const auto mc = flux_monte_carlo(system, S, T, estimator(r, n));
        const auto corrected = flux_quadrature(system, S, T, FluxConvention::normal_mean_positive).phi_plus;
        const auto half = flux_quadrature(system, S, T, FluxConvention::paper_half).phi_plus;
        const double ratio = corrected > 0.0 ? mc.phi_plus / corrected : kNaN;
        out.table.add_row({T, mc.phi_plus, mc.std_error, corrected, half, ratio, corrected > 0.0 ? half / corrected : kNaN});
        if (corrected > 0.0)
            add_check(out, "flux identity at T=" + fmt(T), std::abs(ratio - 1.0) <= 0.02, "MC / quadrature " + fmt(ratio));
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// spectral-gap

ExperimentResult run_spectral_gap(const Json& config) {
    const Reader r(config, "spectral-gap", {"target", "kernel", "T", "epsilon", "bins", "check_refinement"});
    const auto target = r.target();
    if (target->dim() != 1) throw ConfigError("spectral-gap needs a one-dimensional target");
    const auto kind = r.text("kernel", "hmc", {"hmc", "rwm"});
    const auto bins = r.count("bins", 400);
    if (bins < 2) throw ConfigError("\"bins\" must be >= 2");
    const bool refine = r.flag("check_refinement", true);
    const auto params = kind == "rwm" ? r.list("epsilon") : r.list("T");
    auto out = start("spectral-gap", r,
                     {"a", "T_or_eps", "gap", "lambda2", "converged", "refinement_change", "kernel", "warnings"});
    out.table.uncertainty = {{"gap", "deterministic"}, {"lambda2", "deterministic"}};
    HmcMatrixOptions opt;
    opt.flow = r.flow();
    opt.workers = r.workers();
    for (double p : params) {
        auto build = [&](const Grid1D& g) {
            if (kind == "rwm") return rwm_kernel_matrix(*target, p, g);
            auto m = hmc_kernel_matrix(*target, p, g, opt);
            if (!m.valid) throw IntegratorFailure("kernel matrix: " + m.failure, 0.0);
            return m;
        };
        auto grid_for = [&](std::size_t nb) { return Grid1D::for_target(*target, nb); };
        SpectralResult res;
        if (refine) {
            res = refined_gap(build, grid_for, bins);
        } else {
            res = spectral_gap(build(grid_for(bins)));
        }
        std::vector<std::string> warn;
        if (!res.converged) warn.push_back("unconverged grid");
        out.table.add_row({target->shape_parameter(), p, res.gap, res.lambda2, res.converged,
                           refine ? Cell{res.refinement_change} : Cell{}, kind, join(warn)});
        for (const auto& w : warn) out.warnings.push_back(w + " at " + fmt(p));
        add_check(out, "grid convergence at " + fmt(p), res.converged, "change " + fmt(res.refinement_change));
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// scaling

namespace {

struct HittingSummary {
    std::size_t replicas = 0;
    std::size_t censored = 0;
    double q10 = kNaN, median = kNaN, q90 = kNaN, mean = kNaN, se = kNaN;
};

HittingSummary hitting_summary(const MarkovKernel& kernel, double x, const Boundary& S, std::size_t replicas,
                               std::uint64_t horizon, std::uint64_t seed, unsigned workers) {
    HittingSummary s;
    s.replicas = replicas;
    if (replicas == 0) return s;
    std::vector<double> taus(replicas);
    std::vector<unsigned char> cens(replicas, 0);
    parallel_for(replicas, workers, [&](std::size_t i) {
        const auto h = hitting_time(kernel, std::span<const double>(&x, 1), S, horizon, seed, i);
        taus[i] = static_cast<double>(h.tau);
        cens[i] = h.censored;
    });
    for (auto c : cens) s.censored += c;
    s.q10 = quantile(taus, 0.1);
    s.median = quantile(taus, 0.5);
    s.q90 = quantile(taus, 0.9);
    const auto m = mean_and_error(taus);
    s.mean = m.mean;
    s.se = m.std_error;
    return s;
}

}  // namespace

ExperimentResult run_scaling_sweep(const Json& config) {
    const Reader r(config, "scaling",
                   {"sigma", "n", "bins", "gaps", "hitting_replicas", "horizon", "start", "min_odd"});
    const auto sigmas = r.list("sigma", std::vector<double>{0.6, 0.5, 0.4, 0.3, 0.25});
    for (double s : sigmas)
        if (!(s >= 0.25 && s <= 1.0)) throw ConfigError("sigma values must lie in [0.25, 1]");
    const auto n = r.count("n", 100000);
    const auto bins = r.count("bins", 400);
    const bool gaps = r.flag("gaps", true);
    const auto replicas = r.count("hitting_replicas", 200);
    const auto horizon = r.count("horizon", 1000000);
    const double x0 = r.number("start", -1.0);
    const auto min_odd = r.count("min_odd", 30);
    if (n == 0) throw ConfigError("\"n\" must be >= 1");
    const auto S = Boundary::point(0.0);
    if (!S.in_set(std::span<const double>(&x0, 1))) throw ConfigError("\"start\" must lie in S = (-inf, 0)");

    auto out = start("scaling", r,
                     {"sigma", "T", "phi", "phi_se", "phi_source", "bound_half", "bound_corrected", "neg2s2_log_phi",
                      "neg2s2_log_bound_half", "neg2s2_log_bound_corrected", "hmc_gap", "rwm_gap", "log_gap_ratio",
                      "tau_median", "tau_mean", "tau_se", "tau_censored", "warnings"});
    out.table.uncertainty = {{"phi", "phi_se"},
                             {"bound_half", "deterministic"},
                             {"bound_corrected", "deterministic"},
                             {"hmc_gap", "deterministic"},
                             {"rwm_gap", "deterministic"},
                             {"tau_mean", "tau_se"}};
    std::vector<double> trend;
    for (double sigma : sigmas) {
        auto target = std::make_shared<GaussianMixture1D>(sigma);
        const auto system = HamiltonianSystem::isotropic(target);
        const double T = sigma;
        std::vector<std::string> warn;
        const auto bound = corollary1_bound(system, S, T);
        const auto est = parity_conductance(system, S, T, estimator(r, n));
        warn.insert(warn.end(), est.warnings.begin(), est.warnings.end());
        double phi = est.phi;
        Cell phi_se = est.std_error;
        std::string source = "parity";
        if (odd_count(est) < static_cast<double>(min_odd)) {
            phi = bound.normal_mean_positive;
            phi_se = Cell{};
            source = "flux_quadrature";
            warn.push_back("quadrature-only");
        }
        const double s2 = -2.0 * sigma * sigma;
        Cell hmc_gap, rwm_gap, ratio;
        if (gaps) {
            const auto grid = Grid1D::for_target(*target, bins);
            HmcMatrixOptions opt;
            opt.flow = r.flow();
            opt.workers = r.workers();
            const auto hm = hmc_kernel_matrix(*target, T, grid, opt);
            if (!hm.valid) throw IntegratorFailure("kernel matrix: " + hm.failure, 0.0);
            const double hg = spectral_gap(hm).gap;
            const double rg = spectral_gap(rwm_kernel_matrix(*target, sigma, grid)).gap;
            hmc_gap = hg;
            rwm_gap = rg;
            ratio = std::log(hg) / std::log(rg);
        }
        HittingSummary hit;
        if (replicas > 0) {
            const HmcKernel k(target, {T, r.flow()});
            hit = hitting_summary(k, x0, S, replicas, horizon, r.seed(), r.workers());
            if (hit.censored > 0) warn.push_back("censored hitting times: " + std::to_string(hit.censored));
        }
        trend.push_back(s2 * std::log(bound.paper_half));
        out.table.add_row({sigma, T, phi, phi_se, source, bound.paper_half, bound.normal_mean_positive,
                           s2 * std::log(phi), s2 * std::log(bound.paper_half),
                           s2 * std::log(bound.normal_mean_positive), hmc_gap, rwm_gap, ratio,
                           replicas ? Cell{hit.median} : Cell{}, replicas ? Cell{hit.mean} : Cell{},
                           replicas ? Cell{hit.se} : Cell{},
                           replicas ? Cell{static_cast<long long>(hit.censored)} : Cell{}, join(warn)});
        for (const auto& w : warn) out.warnings.push_back("sigma=" + fmt(sigma) + ": " + w);

        if (near(sigma, 0.3)) {
            if (source == "parity")
                add_check(out, "parity within factor 3 of flux bound at sigma=0.3",
                          phi <= 3.0 * bound.normal_mean_positive && phi >= bound.normal_mean_positive / 3.0,
                          "phi " + fmt(phi) + " bound " + fmt(bound.normal_mean_positive));
            if (gaps)
                add_check(out, "HMC/RWM log-gap ratio at sigma=0.3",
                          std::get<double>(ratio) >= 0.8 && std::get<double>(ratio) <= 1.2,
                          "ratio " + fmt(std::get<double>(ratio)));
        }
    }
    bool monotone = true, inside = true;
    for (std::size_t i = 0; i < trend.size(); ++i) {
        inside = inside && trend[i] >= 1.0 && trend[i] <= 2.2;
        if (i > 0) monotone = monotone && ((sigmas[i] < sigmas[i - 1]) == (trend[i] < trend[i - 1]));
    }
    add_check(out, "-2 sigma^2 log(bound) monotone toward 1", monotone, "");
    add_check(out, "-2 sigma^2 log(bound) within [1, 2.2]", inside, "");
    for (std::size_t i = 0; i < sigmas.size(); ++i)
        if (near(sigmas[i], 0.25))
            add_check(out, "-2 sigma^2 log(bound) <= 1.45 at sigma=0.25", trend[i] <= 1.45, fmt(trend[i]));
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// degenerate

ExperimentResult run_degenerate_study(const Json& config) {
    const Reader r(config, "degenerate", {"T", "sigma", "n", "bins"});
    const auto Ts = r.list("T", std::vector<double>{0.1, 0.2, 0.5, 1.0});
    for (double T : Ts)
        if (!(T > 0.0 && T <= 1.0)) throw ConfigError("T values must lie in (0, 1]");
    const auto n = r.count("n", 100000);
    const auto bins = r.count("bins", 400);
    if (n == 0) throw ConfigError("\"n\" must be >= 1");
    const std::optional<double> fixed_sigma = r.has("sigma") ? std::optional<double>(r.number("sigma")) : std::nullopt;
    if (fixed_sigma && !(*fixed_sigma > 0.0)) throw ConfigError("\"sigma\" must be positive");

    auto out = start("degenerate", r,
                     {"T", "sigma", "bound_half", "bound_corrected", "phi", "phi_se", "gap", "rayleigh",
                      "log_phi_over_log_T", "log_gap_over_log_T", "gap_over_half_phi_sq", "cheeger_ok", "warnings"});
    out.table.uncertainty = {{"phi", "phi_se"},
                             {"bound_half", "deterministic"},
                             {"bound_corrected", "deterministic"},
                             {"gap", "deterministic"},
                             {"rayleigh", "deterministic"}};
    for (double T : Ts) {
        const double sigma = fixed_sigma.value_or(T);
        auto target = std::make_shared<DegenerateGaussian2D>(sigma);
        const auto system = HamiltonianSystem::isotropic(target);
        const auto S = Boundary::hyperplane({1.0, 0.0}, 0.0);
        const auto bound = corollary1_bound(system, S, T);
        const auto est = parity_conductance(system, S, T, estimator(r, n));
        const auto spec = degenerate_gaussian_gap(sigma, T, bins);
        const double ray = rayleigh_bound(T);
        const double lo = std::max(0.0, est.phi - 3.0 * est.std_error);
        const double hi = std::min(1.0, est.phi + 3.0 * est.std_error);
        const bool cheeger = cheeger_interval(lo).first <= spec.gap && spec.gap <= cheeger_interval(hi).second;
        out.table.add_row({T, sigma, bound.paper_half, bound.normal_mean_positive, est.phi, est.std_error, spec.gap,
                           ray, T == 1.0 ? kNaN : std::log(est.phi) / std::log(T),
                           T == 1.0 ? kNaN : std::log(spec.gap) / std::log(T),
                           spec.gap / (0.5 * est.phi * est.phi), cheeger, join(est.warnings)});
        for (const auto& w : est.warnings) out.warnings.push_back("T=" + fmt(T) + ": " + w);
        add_check(out, "grid gap equals 1 - cos T at T=" + fmt(T), std::abs(spec.gap - (1.0 - std::cos(T))) < 1e-3,
                  "gap " + fmt(spec.gap));
        add_check(out, "Rayleigh bound coincides at T=" + fmt(T), std::abs(ray - spec.gap) < 1e-3, "");
        add_check(out, "Cheeger sandwich at T=" + fmt(T), cheeger, "phi " + fmt(est.phi));
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// figure

ExperimentResult run_figure(const Json& config) {
    const Reader r(config, "figure", {"a", "T", "bins", "check_refinement", "slope_T", "slope_a"});
    const auto a_list = r.list("a", std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0, 2.5});
    const auto T_list = r.list("T", std::vector<double>{kPi / 8, kPi / 4, 1.0, 3 * kPi / 8, kPi / 2, 3 * kPi / 4,
                                                        kPi, 3 * kPi / 2});
    for (double a : a_list)
        if (!(a >= 0.0 && a <= 3.0)) throw ConfigError("a values must lie in [0, 3]");
    for (double T : T_list)
        if (!(T > 0.0 && T <= 2 * kPi)) throw ConfigError("T values must lie in (0, 2 pi]");
    if (!std::is_sorted(a_list.begin(), a_list.end()) || !std::is_sorted(T_list.begin(), T_list.end()))
        throw ConfigError("a and T lists must be sorted");
    GapSurfaceOptions opt;
    opt.n_bins = r.count("bins", 400);
    opt.check_refinement = r.flag("check_refinement", true);
    opt.matrix.flow = r.flow();
    opt.matrix.workers = r.workers();
    opt.slope_a = r.list("slope_a", std::vector<double>{1.5, 2.0, 2.5});
    const double slope_T = r.number("slope_T", 1.0);
    const auto surface = gap_surface(a_list, T_list, opt);

    auto out = start("figure", r, {"a", "T", "gap", "lambda2", "refinement_change", "converged", "warnings"});
    out.table.uncertainty = {{"gap", "deterministic"}, {"lambda2", "deterministic"}};
    for (const auto& c : surface.cells) {
        const std::string warn = c.converged ? "" : "unconverged grid";
        out.table.add_row({c.a, c.T, c.gap, c.lambda2, opt.check_refinement ? Cell{c.refinement_change} : Cell{},
                           c.converged, warn});
        if (!c.converged) out.warnings.push_back("unconverged grid at a=" + fmt(c.a) + ", T=" + fmt(c.T));
    }
    Json slopes = Json::array();
    for (const auto& [T, s] : surface.slopes) slopes.push_back({{"T", T}, {"slope", s}});
    out.sidecar["slopes"] = slopes;

    auto cell = [&](double a, double T) -> const GapCell* {
        for (const auto& c : surface.cells)
            if (near(c.a, a) && near(c.T, T)) return &c;
        return nullptr;
    };
    if (const auto* top = cell(0.0, kPi / 2)) {
        add_check(out, "a=0 gap reaches 1 at T=pi/2", std::abs(top->gap - 1.0) <= 1e-3, "gap " + fmt(top->gap));
        for (double T : {kPi / 8, kPi / 4, 3 * kPi / 8}) {
            if (const auto* c = cell(0.0, T)) {
                const double linear = top->gap * T / (kPi / 2);
                add_check(out, "a=0 gap within 15% of linear interpolation at T=" + fmt(T),
                          std::abs(c->gap - linear) <= 0.15 * linear,
                          "gap " + fmt(c->gap) + " vs linear " + fmt(linear));
            }
        }
    }
    for (const auto& [T, s] : surface.slopes)
        if (near(T, slope_T))
            add_check(out, "log-gap vs a^2 slope at T=" + fmt(T), std::abs(s + 0.5) <= 0.1, "slope " + fmt(s));
    add_check(out, "all cells converged",
              std::all_of(surface.cells.begin(), surface.cells.end(), [](const GapCell& c) { return c.converged; }), "");
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// hitting

ExperimentResult run_hitting(const Json& config) {
    const Reader r(config, "hitting", {"sigma", "start", "replicas", "horizon", "kernel", "boundary"});
    const auto sigmas = r.list("sigma", std::vector<double>{0.6, 0.5, 0.4});
    const double x0 = r.number("start", -1.0);
    const auto replicas = r.count("replicas", 1000);
    const auto horizon = r.count("horizon", 1000000);
    const auto kind = r.text("kernel", "hmc", {"hmc", "rwm"});
    if (replicas == 0) throw ConfigError("\"replicas\" must be >= 1");
    const auto S = r.boundary(1);
    // Whole-space (or empty) sets leave the hitting time undefined.
    if (S.kind() != Boundary::Kind::point_set) throw ConfigError("hitting: boundary must be point1d");
    if (!S.in_set(std::span<const double>(&x0, 1))) throw ConfigError("\"start\" must lie in S");

    auto out = start("hitting", r,
                     {"sigma", "kernel", "replicas", "censored", "tau_q10", "tau_median", "tau_q90", "tau_mean",
                      "tau_se", "phi_flux", "log_median_over_neg_log_phi", "warnings"});
    out.table.uncertainty = {{"tau_mean", "tau_se"}, {"phi_flux", "deterministic"}};
    for (double sigma : sigmas) {
        if (!(sigma > 0.0)) throw ConfigError("sigma values must be positive");
        auto target = std::make_shared<GaussianMixture1D>(sigma);
        const auto system = HamiltonianSystem::isotropic(target);
        const auto k = make_kernel(r, target, kind, sigma);
        const auto hit = hitting_summary(*k, x0, S, replicas, horizon, r.seed(), r.workers());
        const double phi = corollary1_bound(system, S, sigma).normal_mean_positive;
        const double ratio = std::log(hit.median) / -std::log(phi);
        std::vector<std::string> warn;
        if (hit.censored > 0) warn.push_back("censored: " + std::to_string(hit.censored));
        out.table.add_row({sigma, kind, static_cast<long long>(replicas), static_cast<long long>(hit.censored), hit.q10,
                           hit.median, hit.q90, hit.mean, hit.se, phi, ratio, join(warn)});
        for (const auto& w : warn) out.warnings.push_back("sigma=" + fmt(sigma) + ": " + w);
        if (near(sigma, 0.4))
            add_check(out, "log median tau / -log phi at sigma=0.4", ratio >= 0.6 && ratio <= 1.3, "ratio " + fmt(ratio));
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// drift

ExperimentResult run_drift(const Json& config) {
    const Reader r(config, "drift", {"target", "kernel", "T", "epsilon", "x", "n", "scale", "tail_radius", "metric"});
    const auto target = r.target(Json{{"kind", "mixture1d"}, {"sigma", 0.3}});
    const auto kind = r.text("kernel", "hmc", {"hmc", "rwm", "rhmc"});
    const double sigma = target->shape_parameter();
    const double param = kind == "rwm" ? r.number("epsilon", sigma) : r.number("T", sigma);
    const auto xs = r.list("x", std::vector<double>{-3.0});
    const auto n = r.count("n", 100000);
    const double scale = r.number("scale", 0.0);
    const double tail = r.number("tail_radius", 1.0);
    if (n < 2) throw ConfigError("\"n\" must be >= 2");
    if (scale < 0.0) throw ConfigError("\"scale\" must be >= 0 (0 selects the target's shape parameter)");
    if (!(tail > 0.0)) throw ConfigError("\"tail_radius\" must be positive");
    if (target->dim() != 1 && xs.size() % target->dim() != 0) throw ConfigError("\"x\" length must be a multiple of dim");
    const auto k = make_kernel(r, target, kind, param);
    auto out = start("drift", r,
                     {"x", "kernel", "param", "ratio", "se", "upper_95", "in_region", "passed", "status"});
    out.table.uncertainty = {{"ratio", "se"}};
    const std::size_t d = target->dim();
    for (std::size_t i = 0; i + d <= xs.size(); i += d) {
        std::vector<double> x(xs.begin() + static_cast<std::ptrdiff_t>(i), xs.begin() + static_cast<std::ptrdiff_t>(i + d));
        const auto e = lyapunov_drift(*k, x, n, r.seed(), scale, tail, r.workers());
        out.table.add_row({x[0], kind, param, e.ratio, e.std_error, e.upper_95, e.in_drift_region, e.passed, e.status});
        add_check(out, "drift at x=" + fmt(x[0]), e.passed, "upper 95% " + fmt(e.upper_95));
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// chains

ExperimentResult run_chain_dump(const Json& config) {
    const Reader r(config, "chains", {"target", "kernel", "T", "epsilon", "chains", "steps", "start", "metric"});
    const auto target = r.target();
    const auto kind = r.text("kernel", "hmc", {"hmc", "rwm", "rhmc"});
    const double param = kind == "rwm" ? r.number("epsilon") : r.number("T");
    const auto n_chains = r.count("chains", 4);
    const auto n_steps = r.count("steps", 100);
    const auto k = make_kernel(r, target, kind, param);
    std::optional<std::vector<double>> x0;
    if (r.has("start")) {
        x0 = r.list("start");
        if (x0->size() != target->dim()) throw ConfigError("\"start\" has the wrong dimension");
    }
    const auto paths = run_chains(*k, n_chains, n_steps, r.seed(), x0 ? &*x0 : nullptr, r.workers());
    std::vector<std::string> cols{"chain_id", "step"};
    for (std::size_t j = 0; j < target->dim(); ++j) cols.push_back("q" + std::to_string(j));
    auto out = start("chains", r, cols);
    for (std::size_t c = 0; c < paths.size(); ++c) {
        for (std::size_t s = 0; s < paths[c].size(); ++s) {
            std::vector<Cell> row{static_cast<long long>(c), static_cast<long long>(s)};
            if (paths[c][s].empty()) {
                for (std::size_t j = 0; j < target->dim(); ++j) row.emplace_back();
            } else {
                for (double v : paths[c][s]) row.emplace_back(v);
            }
            out.table.add_row(std::move(row));
        }
    }
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"conductance", "flux",    "spectral-gap", "scaling", "degenerate",
                                                "figure",      "hitting", "drift",        "chains"};
    return names;
}

std::string experiment_help(const std::string& name) {
    if (name == "conductance")
        return "conductance: keys target, boundary, T (list), method parity|direct|flux, kernel hmc|rwm|rhmc, "
               "epsilon, n, seed, workers, flow.\n  columns: method,kernel,T,epsilon,phi,se,phi_plus_half,"
               "phi_plus_corrected,pi_S,n,resamples,identity_residual,warnings";
    if (name == "flux")
        return "flux: keys target, boundary, T (list), n, seed, workers, flow.\n  columns: T,phi_plus_mc,se,"
               "phi_plus_corrected,phi_plus_half,mc_over_corrected,half_over_corrected";
    if (name == "spectral-gap")
        return "spectral-gap: keys target (1D), kernel hmc|rwm, T or epsilon (list), bins, check_refinement.\n"
               "  columns: a,T_or_eps,gap,lambda2,converged,refinement_change,kernel,warnings";
    if (name == "scaling")
        return "scaling: keys sigma (list in [0.25,1]), n, bins, gaps, hitting_replicas, horizon, start, min_odd.\n"
               "  columns: sigma,T,phi,phi_se,phi_source,bound_half,bound_corrected,neg2s2_log_phi,"
               "neg2s2_log_bound_half,neg2s2_log_bound_corrected,hmc_gap,rwm_gap,log_gap_ratio,tau_median,"
               "tau_mean,tau_se,tau_censored,warnings";
    if (name == "degenerate")
        return "degenerate: keys T (list in (0,1]), sigma (default: sigma = T), n, bins.\n  columns: T,sigma,"
               "bound_half,bound_corrected,phi,phi_se,gap,rayleigh,log_phi_over_log_T,log_gap_over_log_T,"
               "gap_over_half_phi_sq,cheeger_ok,warnings";
    if (name == "figure")
        return "figure: keys a (list in [0,3]), T (list in (0,2pi]), bins, check_refinement, slope_T, slope_a.\n"
               "  columns: a,T,gap,lambda2,refinement_change,converged,warnings";
    if (name == "hitting")
        return "hitting: keys sigma (list), start, replicas, horizon, kernel hmc|rwm, boundary (point1d).\n"
               "  columns: sigma,kernel,replicas,censored,tau_q10,tau_median,tau_q90,tau_mean,tau_se,phi_flux,"
               "log_median_over_neg_log_phi,warnings";
    if (name == "drift")
        return "drift: keys target, kernel hmc|rwm|rhmc, T or epsilon (default sigma), x (list), n, scale, "
               "tail_radius.\n  columns: x,kernel,param,ratio,se,upper_95,in_region,passed,status";
    if (name == "chains")
        return "chains: keys target, kernel hmc|rwm|rhmc, T or epsilon, chains, steps, start, metric.\n"
               "  columns: chain_id,step,q0..q{d-1}";
    throw ConfigError("unknown experiment \"" + name + "\"");
}

ExperimentResult run_experiment(const std::string& name, const Json& config) {
    static const std::map<std::string, std::function<ExperimentResult(const Json&)>> table{
        {"conductance", run_conductance}, {"flux", run_flux},       {"spectral-gap", run_spectral_gap},
        {"scaling", run_scaling_sweep},   {"degenerate", run_degenerate_study}, {"figure", run_figure},
        {"hitting", run_hitting},         {"drift", run_drift},     {"chains", run_chain_dump}};
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown experiment \"" + name + "\"");
    return it->second(config);
}

}  // namespace hmcgap
