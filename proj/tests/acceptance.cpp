// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "hmcgap/conductance.hpp"
#include "hmcgap/experiments.hpp"
#include "hmcgap/normal.hpp"
#include "hmcgap/samplers.hpp"
#include "hmcgap/spectral.hpp"
#include "hmcgap/stats.hpp"

using namespace hmcgap;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool passed = false;
    std::string summary;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string g(double x) { return fmt("%.4g", x); }

// CSV outputs of criteria 4, 7 and 11, kept for the determinism rerun.
std::string csv4, csv7, csv11;

Json conductance_config(const Json& target, double T, const std::string& method, unsigned workers) {
    return {{"target", target}, {"T", T}, {"method", method}, {"n", 100000}, {"seed", 4}, {"workers", workers}};
}

// ---------------------------------------------------------------------------------------------

Outcome ac1() {
    auto sys = HamiltonianSystem::isotropic(std::make_shared<Gaussian1D>());
    FlowConfig numeric;
    numeric.force_numeric = true;
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        RandomStream rng(101, i, 0);
        const double q = 3.0 * (2.0 * rng.uniform() - 1.0);
        const double p = 3.0 * (2.0 * rng.uniform() - 1.0);
        const double T = 3.0 * rng.uniform();
        const auto end = flow(sys, {{q}, {p}}, T, numeric).end();
        const auto exact = exact_flow_gaussian(q, p, T);
        worst = std::max({worst, std::abs(end.q[0] - exact.q[0]), std::abs(end.p[0] - exact.p[0])});
    }
    return {worst <= 1e-8, "numeric vs closed-form flow, max endpoint error " + g(worst) + " over 1000 (q,p,T<=3)"};
}

Outcome ac2() {
    struct Case {
        std::string name;
        std::shared_ptr<const TargetDensity> target;
        bool numeric;
    };
    const std::vector<Case> cases{
        {"gauss1d", std::make_shared<Gaussian1D>(), false},
        {"gauss1d(numeric)", std::make_shared<Gaussian1D>(), true},
        {"mixture1d(0.5)", std::make_shared<GaussianMixture1D>(0.5), true},
        {"mixture1d(0.3)", std::make_shared<GaussianMixture1D>(0.3), true},
        {"maxgauss1d(1.5)", std::make_shared<MaxGaussian1D>(1.5), false},
        {"mixtureNd(3,0.5)", std::make_shared<IsotropicMixtureD>(3, 0.5), true},
        {"degenerate2d(0.3)", std::make_shared<DegenerateGaussian2D>(0.3), false},
        {"degenerate2d(0.3,numeric)", std::make_shared<DegenerateGaussian2D>(0.3), true},
    };
    double worst_h = 0.0, worst_rt = 0.0;
    std::string worst_name;
    for (const auto& c : cases) {
        const auto sys = HamiltonianSystem::isotropic(c.target);
        FlowConfig cfg;
        cfg.force_numeric = c.numeric;
        const std::size_t d = c.target->dim();
        for (std::uint64_t i = 0; i < 100; ++i) {
            RandomStream rng(202, i, 0);
            PhasePoint x{std::vector<double>(d), std::vector<double>(d)};
            c.target->sample(rng, x.q);
            rng.fill_normal(x.p);
            const double T = 0.05 + 2.95 * rng.uniform();
            const auto fwd = flow(sys, x, T, cfg).end();
            PhasePoint back_start{fwd.q, fwd.p};
            for (auto& v : back_start.p) v = -v;
            const auto back = flow(sys, back_start, T, cfg).end();
            const double dh = std::abs(sys.energy(fwd) - sys.energy(x));
            double rt = 0.0;
            for (std::size_t k = 0; k < d; ++k) rt = std::max({rt, std::abs(back.q[k] - x.q[k]), std::abs(back.p[k] + x.p[k])});
            if (dh > worst_h || rt > worst_rt) worst_name = c.name;
            worst_h = std::max(worst_h, dh);
            worst_rt = std::max(worst_rt, rt);
        }
    }
    return {worst_h <= 1e-8 && worst_rt <= 1e-7, "max |dH| " + g(worst_h) + ", max round-trip error " + g(worst_rt) +
                                                     " over 8 target/flow cases x 100 (worst " + worst_name + ")"};
}

Outcome ac3() {
    bool ok = true;
    std::string s;
    for (const auto& [name, target] : std::vector<std::pair<std::string, std::shared_ptr<const TargetDensity>>>{
             {"gauss1d", std::make_shared<Gaussian1D>()}, {"mixture1d(0.5)", std::make_shared<GaussianMixture1D>(0.5)}}) {
        for (double T : {0.3, 1.0}) {
            const HmcKernel k(target, {T});
            const auto paths = run_chains(k, 100000, 1, 303);
            std::vector<double> end(paths.size());
            for (std::size_t i = 0; i < paths.size(); ++i) end[i] = paths[i][1][0];
            const auto ks = ks_test(end, [&](double x) { return halfline_mass(*target, x); });
            ok = ok && ks.p_value > 0.01;
            s += name + " T=" + g(T) + " p=" + g(ks.p_value) + "; ";
        }
    }
    return {ok, "KS of flowed positions vs pi, n=1e5: " + s};
}

Outcome ac4() {
    bool ok = true;
    std::string s;
    csv4.clear();
    const std::vector<std::pair<Json, double>> cases{{{{"kind", "gauss1d"}}, 0.5},
                                                     {{{"kind", "mixture1d"}, {"sigma", 0.5}}, 0.5},
                                                     {{{"kind", "mixture1d"}, {"sigma", 0.4}}, 0.4}};
    for (const auto& [target, T] : cases) {
        const auto parity = run_conductance(conductance_config(target, T, "parity", 0));
        const auto direct = run_conductance(conductance_config(target, T, "direct", 0));
        csv4 += parity.table.csv() + direct.table.csv();
        const double a = parity.table.number(0, "phi"), sa = parity.table.number(0, "se");
        const double b = direct.table.number(0, "phi"), sb = direct.table.number(0, "se");
        const double z = std::abs(a - b) / std::sqrt(sa * sa + sb * sb);
        ok = ok && z <= 3.0;
        s += target["kind"].get<std::string>() + (target.contains("sigma") ? "(" + g(target["sigma"]) + ")" : "") +
             " parity " + g(a) + " direct " + g(b) + " z=" + fmt("%.2f", z) + "; ";
        if (target["kind"] == "gauss1d") {
            const double zx = std::abs(a - T / kPi) / sa;
            ok = ok && zx <= 3.0;
            s += "exact T/pi " + g(T / kPi) + "; ";
        }
    }
    return {ok, s};
}

Outcome ac5() {
    bool ok = true;
    std::string s;
    for (const auto& [name, target] : std::vector<std::pair<std::string, std::shared_ptr<const TargetDensity>>>{
             {"gauss1d", std::make_shared<Gaussian1D>()}, {"mixture1d(0.5)", std::make_shared<GaussianMixture1D>(0.5)}}) {
        const auto sys = HamiltonianSystem::isotropic(target);
        const auto S = Boundary::point(0.0);
        EstimatorConfig cfg;
        cfg.n = 1000000;
        cfg.seed = 505;
        const double T = 1.0;
        const auto mc = flux_monte_carlo(sys, S, T, cfg);
        const double corrected = flux_quadrature(sys, S, T, FluxConvention::normal_mean_positive).phi_plus;
        const double half = flux_quadrature(sys, S, T, FluxConvention::paper_half).phi_plus;
        const double rel = std::abs(mc.phi_plus / corrected - 1.0);
        ok = ok && rel <= 0.02;
        s += name + " MC " + g(mc.phi_plus) + " quad " + g(corrected) + " rel " + fmt("%.2e", rel) +
             " (half-convention factor " + fmt("%.4f", half / corrected) + "); ";
    }
    return {ok, s};
}

Outcome ac6() {
    auto target = std::make_shared<Gaussian1D>();
    const auto sys = HamiltonianSystem::isotropic(target);
    const auto S = Boundary::point(0.0);
    bool ok = true;
    std::string s;
    EstimatorConfig cfg;
    cfg.n = 100000;
    cfg.seed = 606;
    for (double T : {0.1, 0.5, 1.0, 2.0, 2 * kPi}) {
        const auto est = parity_conductance(sys, S, T, cfg);
        const double bound = corollary1_bound(sys, S, T).normal_mean_positive;
        const bool below = est.phi <= bound + 3.0 * est.std_error;
        ok = ok && below;
        s += "T=" + g(T) + " phi " + g(est.phi) + " <= " + g(bound) + (below ? "" : " VIOLATED") + "; ";
    }
    EstimatorConfig fine = cfg;
    fine.n = 1000000;
    const auto probe = linear_T_probe(sys, S, {0.05}, fine);
    const double rel = probe.smallest_T_relative_error;
    ok = ok && rel <= 0.05;
    s += "T=0.05: phi/T " + g(probe.rows[0].phi_over_T) + " vs flux constant " + g(probe.flux_constant) + " (rel " +
         fmt("%.2e", rel) + ")";
    return {ok, s};
}

Json scaling_config(unsigned workers) {
    return {{"sigma", {0.6, 0.5, 0.4, 0.3, 0.25}},
            {"n", 100000},
            {"seed", 7},
            {"gaps", false},
            {"hitting_replicas", 0},
            {"workers", workers}};
}

Outcome ac7() {
    const auto r = run_scaling_sweep(scaling_config(0));
    csv7 = r.table.csv();
    std::string s = "-2s^2 log(bound):";
    for (std::size_t i = 0; i < r.table.rows.size(); ++i)
        s += " " + g(r.table.number(i, "neg2s2_log_bound_half"));
    s += " (corrected:";
    for (std::size_t i = 0; i < r.table.rows.size(); ++i)
        s += " " + g(r.table.number(i, "neg2s2_log_bound_corrected"));
    s += ");";
    for (const auto& c : r.checks) s += " " + std::string(c.passed ? "ok" : "FAILED") + " " + c.name + ";";
    return {r.all_checks_passed() && r.checks.size() == 4, s};
}

Outcome ac8() {
    bool ok = true;
    std::string s;
    HmcMatrixOptions opt;
    for (double sigma : {0.4, 0.3}) {
        const GaussianMixture1D mix(sigma);
        const auto grid = Grid1D::for_target(mix, 400);
        const auto hm = hmc_kernel_matrix(mix, sigma, grid, opt);
        const double hg = spectral_gap(hm).gap;
        const double rg = spectral_gap(rwm_kernel_matrix(mix, sigma, grid)).gap;
        const double ratio = std::log(hg) / std::log(rg);
        ok = ok && hm.valid && ratio >= 0.8 && ratio <= 1.2;
        s += "sigma=" + g(sigma) + " HMC gap " + g(hg) + " RWM gap " + g(rg) + " log-ratio " + fmt("%.3f", ratio) + "; ";
        if (sigma == 0.3) {
            const double wide = spectral_gap(rwm_kernel_matrix(mix, 10.0, grid)).gap;
            const double factor = wide / rg;
            ok = ok && factor >= 100.0;
            s += "RWM eps=10 gap " + g(wide) + " = " + fmt("%.1f", factor) + "x eps=sigma (needs >= 100)";
        }
    }
    return {ok, s};
}

Outcome ac9() {
    const auto r = run_degenerate_study({{"T", {0.1, 0.2, 0.5, 1.0}}, {"n", 100000}, {"seed", 9}});
    std::string s;
    for (std::size_t i = 0; i < r.table.rows.size(); ++i)
        s += "T=" + g(r.table.number(i, "T")) + " gap " + g(r.table.number(i, "gap")) + " 1-cosT " +
             g(r.table.number(i, "rayleigh")) + " phi " + g(r.table.number(i, "phi")) + "; ";
    std::size_t failed = 0;
    for (const auto& c : r.checks) failed += !c.passed;
    s += std::to_string(r.checks.size() - failed) + "/" + std::to_string(r.checks.size()) + " checks";
    return {r.all_checks_passed(), s};
}

Outcome ac10() {
    const auto r = run_figure({{"bins", 400}});
    std::string s = std::to_string(r.table.rows.size()) + " cells;";
    for (const auto& c : r.checks) s += " " + std::string(c.passed ? "ok" : "FAILED") + " " + c.name + " (" + c.detail + ");";
    return {r.all_checks_passed(), s};
}

Json hitting_config(unsigned workers) {
    return {{"sigma", 0.4}, {"replicas", 1000}, {"seed", 11}, {"workers", workers}};
}

Outcome ac11() {
    const auto r = run_hitting(hitting_config(0));
    csv11 = r.table.csv();
    const double ratio = r.table.number(0, "log_median_over_neg_log_phi");
    return {r.all_checks_passed() && ratio >= 0.6 && ratio <= 1.3,
            "sigma=0.4 median tau " + g(r.table.number(0, "tau_median")) + ", flux phi " +
                g(r.table.number(0, "phi_flux")) + ", log median / -log phi " + fmt("%.3f", ratio) + " (censored " +
                g(r.table.number(0, "censored")) + ")"};
}

Outcome ac12() {
    bool ok = true;
    std::string s;
    for (const std::string kernel : {"hmc", "rwm"}) {
        const auto r = run_drift({{"target", {{"kind", "mixture1d"}, {"sigma", 0.3}}},
                                  {"kernel", kernel},
                                  {"x", -3.0},
                                  {"n", 100000},
                                  {"seed", 12}});
        ok = ok && r.all_checks_passed();
        s += kernel + " KV/V " + g(r.table.number(0, "ratio")) + " (95% upper " + g(r.table.number(0, "upper_95")) + "); ";
    }
    return {ok, s};
}

Outcome ac13() {
    std::string c4;
    for (const auto& [target, T] : std::vector<std::pair<Json, double>>{{{{"kind", "gauss1d"}}, 0.5},
                                                                        {{{"kind", "mixture1d"}, {"sigma", 0.5}}, 0.5},
                                                                        {{{"kind", "mixture1d"}, {"sigma", 0.4}}, 0.4}}) {
        c4 += run_conductance(conductance_config(target, T, "parity", 8)).table.csv();
        c4 += run_conductance(conductance_config(target, T, "direct", 8)).table.csv();
    }
    std::string c4_serial;
    for (const auto& [target, T] : std::vector<std::pair<Json, double>>{{{{"kind", "gauss1d"}}, 0.5},
                                                                        {{{"kind", "mixture1d"}, {"sigma", 0.5}}, 0.5},
                                                                        {{{"kind", "mixture1d"}, {"sigma", 0.4}}, 0.4}}) {
        c4_serial += run_conductance(conductance_config(target, T, "parity", 1)).table.csv();
        c4_serial += run_conductance(conductance_config(target, T, "direct", 1)).table.csv();
    }
    const bool same4 = c4 == c4_serial && c4 == csv4;
    const bool same7 = run_scaling_sweep(scaling_config(1)).table.csv() == csv7 &&
                       run_scaling_sweep(scaling_config(8)).table.csv() == csv7;
    const bool same11 =
        run_hitting(hitting_config(1)).table.csv() == csv11 && run_hitting(hitting_config(8)).table.csv() == csv11;
    auto word = [](bool b) { return b ? std::string("identical") : std::string("DIFFERENT"); };
    return {same4 && same7 && same11, "criterion 4 CSV " + word(same4) + ", criterion 7 CSV " + word(same7) +
                                          ", criterion 11 CSV " + word(same11) + " under 1 and 8 workers"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3},   {"AC4", ac4},   {"AC5", ac5},   {"AC6", ac6},   {"AC7", ac7},
        {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}, {"AC11", ac11}, {"AC12", ac12}, {"AC13", ac13}};
    int failures = 0;
    for (const auto& [id, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !o.passed;
        std::printf("%-4s %s %s [%.1f s]\n", id.c_str(), o.passed ? "PASS" : "FAIL", o.summary.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
