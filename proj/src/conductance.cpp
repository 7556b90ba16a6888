#include "hmcgap/conductance.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "hmcgap/normal.hpp"
#include "hmcgap/parallel.hpp"
#include "hmcgap/stats.hpp"

namespace hmcgap {

std::string to_string(ConductanceMethod m) {
    switch (m) {
        case ConductanceMethod::direct: return "direct";
        case ConductanceMethod::parity: return "parity";
        case ConductanceMethod::flux_bound: return "flux_bound";
    }
    return "?";
}

std::string to_string(FluxMethod m) {
    switch (m) {
        case FluxMethod::mc_halfN: return "mc_halfN";
        case FluxMethod::quadrature_general: return "quadrature_general";
        case FluxMethod::quadrature_paper_simple: return "quadrature_paper_simple";
    }
    return "?";
}

std::string to_string(FluxConvention c) {
    return c == FluxConvention::paper_half ? "paper_half" : "normal_mean_positive";
}

namespace {

constexpr std::uint64_t kStartStep = std::numeric_limits<std::uint64_t>::max();

void draw_momentum(const HamiltonianSystem& system, std::span<const double> q, RandomStream& rng, MomentumLaw law,
                   std::span<double> p) {
    rng.fill_normal(p);
    if (system.flows_isotropically()) return;
    const auto d = static_cast<Eigen::Index>(p.size());
    Eigen::Map<Eigen::VectorXd> z(p.data(), d);
    Eigen::LLT<Eigen::MatrixXd> llt(system.metric()->G(q));
    if (llt.info() != Eigen::Success)
        throw MetricError("metric is not positive definite", std::vector<double>(q.begin(), q.end()));
    const Eigen::VectorXd out = law == MomentumLaw::metric ? Eigen::VectorXd(llt.matrixL() * z)
                                                           : Eigen::VectorXd(llt.matrixU().solve(z));
    z = out;
}

void require_horizon(double T) {
    if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("integration time must be finite and >= 0");
}

struct ParitySample {
    std::vector<std::size_t> crossings;
    std::size_t resamples = 0;
};

ParitySample sample_crossings(const HamiltonianSystem& system, const Boundary& set, double T,
                              const EstimatorConfig& config) {
    const std::size_t d = system.dim();
    ParitySample out;
    out.crossings.assign(config.n, 0);
    std::vector<std::size_t> resamples(config.n, 0);
    parallel_for(config.n, config.workers, [&](std::size_t i) {
        PhasePoint x{std::vector<double>(d), std::vector<double>(d)};
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt >= config.max_resamples)
                throw IntegratorFailure("parity sample " + std::to_string(i) + ": tangential after resampling", 0.0);
            RandomStream rng(config.seed, i, attempt);
            system.target().sample(rng, x.q);
            draw_momentum(system, x.q, rng, config.momentum, x.p);
            if (T == 0.0) return;  // no path, no crossings
            const auto traj = flow(system, x, T, config.flow);
            const auto rec = count_crossings(traj, set, config.refine_tol);
            if (rec.non_transverse()) {
                ++resamples[i];
                continue;
            }
            out.crossings[i] = rec.count;
            return;
        }
    });
    out.resamples = std::accumulate(resamples.begin(), resamples.end(), std::size_t{0});
    return out;
}

}  // namespace

ConductanceEstimate direct_conductance(const MarkovKernel& kernel, const Boundary& set, std::size_t n,
                                       std::uint64_t seed, unsigned workers) {
    if (n == 0) throw std::invalid_argument("direct_conductance: n must be >= 1");
    const std::size_t d = kernel.dim();
    // 0: start outside S, 1: stayed in S, 2: escaped.
    std::vector<unsigned char> outcome(n, 0);
    parallel_for(n, workers, [&](std::size_t i) {
        std::vector<double> q(d), next(d);
        RandomStream init(seed, i, kStartStep);
        kernel.target().sample(init, q);
        if (!set.in_set(q)) return;
        RandomStream rng(seed, i, 0);
        kernel.step(q, rng, next);
        outcome[i] = set.in_set(next) ? 1 : 2;
    });
    std::size_t retained = 0, escaped = 0;
    for (unsigned char o : outcome) {
        retained += o != 0;
        escaped += o == 2;
    }
    if (retained == 0) throw DomainError("pi(S) too small for direct estimation");
    const auto p = proportion(escaped, retained);
    ConductanceEstimate est;
    est.method = ConductanceMethod::direct;
    est.phi = p.mean;
    est.std_error = p.std_error;
    est.n_samples = retained;
    return est;
}

ConductanceEstimate parity_conductance(const HamiltonianSystem& system, const Boundary& set, double T,
                                       const EstimatorConfig& config) {
    require_horizon(T);
    if (config.n == 0) throw std::invalid_argument("parity_conductance: n must be >= 1");
    const double pi_S = set_mass(system.target(), set);
    if (!(pi_S > 0.0)) throw DomainError("parity_conductance: pi(S) is zero");
    const auto sample = sample_crossings(system, set, T, config);

    std::size_t odd = 0, total = 0;
    for (std::size_t c : sample.crossings) {
        odd += c % 2;
        total += c;
    }
    const double n = static_cast<double>(config.n);
    const auto p_odd = proportion(odd, config.n);
    const double mean_n = static_cast<double>(total) / n;

    ConductanceEstimate est;
    est.method = ConductanceMethod::parity;
    est.n_samples = config.n;
    est.resample_count = sample.resamples;
    est.phi = 0.5 * p_odd.mean / pi_S;
    est.std_error = 0.5 * p_odd.std_error / pi_S;
    est.pi_S = pi_S;
    est.odd_probability = p_odd.mean;
    est.mean_crossings = mean_n;
    est.flux_plus = 0.5 * mean_n;
    if (total > 0) {
        est.tilted_expectation = p_odd.mean / mean_n;
        est.identity_residual = std::abs(*est.flux_plus * *est.tilted_expectation / pi_S - est.phi);
    } else {
        est.tilted_expectation = 0.0;
        est.identity_residual = 0.0;
    }
    if (static_cast<double>(sample.resamples) > 0.01 * n) est.warnings.emplace_back("boundary/step configuration suspect");
    return est;
}

FluxEstimate flux_monte_carlo(const HamiltonianSystem& system, const Boundary& set, double T,
                              const EstimatorConfig& config) {
    require_horizon(T);
    const auto sample = sample_crossings(system, set, T, config);
    std::vector<double> half(sample.crossings.size());
    for (std::size_t i = 0; i < half.size(); ++i) half[i] = 0.5 * static_cast<double>(sample.crossings[i]);
    const auto m = mean_and_error(half);
    FluxEstimate est;
    est.phi_plus = m.mean;
    est.std_error = m.std_error;
    est.method = FluxMethod::mc_halfN;
    est.convention = FluxConvention::normal_mean_positive;
    return est;
}

FluxEstimate flux_quadrature(const HamiltonianSystem& system, const Boundary& set, double T,
                             FluxConvention convention) {
    require_horizon(T);
    if (set.kind() == Boundary::Kind::level_set && set.circle_center().empty())
        throw std::invalid_argument("flux_quadrature: unsupported boundary variant");
    // Standard deviation of the normal momentum <G^{-1} p, eta> for p ~ N(0, G): sqrt(eta' G^{-1} eta).
    auto normal_sd = [&](std::span<const double> q, std::span<const double> eta) {
        if (system.flows_isotropically()) return 1.0;
        const auto d = static_cast<Eigen::Index>(eta.size());
        Eigen::Map<const Eigen::VectorXd> e(eta.data(), d);
        return std::sqrt(e.dot(system.metric()->G_inv(q) * e));
    };
    FluxEstimate est;
    est.convention = convention;
    if (convention == FluxConvention::paper_half) {
        est.method = FluxMethod::quadrature_paper_simple;
        est.phi_plus = T * boundary_integral(system.target(), set, [&](auto q, auto eta) { return 0.5 * normal_sd(q, eta); });
    } else {
        est.method = FluxMethod::quadrature_general;
        est.phi_plus =
            T * boundary_integral(system.target(), set, [&](auto q, auto eta) { return kInvSqrt2Pi * normal_sd(q, eta); });
    }
    return est;
}

Corollary1Bound corollary1_bound(const HamiltonianSystem& system, const Boundary& set, double T) {
    Corollary1Bound b;
    b.pi_S = set_mass(system.target(), set);
    if (!(b.pi_S > 0.0)) throw DomainError("corollary1_bound: pi(S) is zero");
    b.paper_half = flux_quadrature(system, set, T, FluxConvention::paper_half).phi_plus / b.pi_S;
    b.normal_mean_positive = flux_quadrature(system, set, T, FluxConvention::normal_mean_positive).phi_plus / b.pi_S;
    return b;
}

std::pair<double, double> cheeger_interval(double phi) {
    if (!(phi >= 0.0 && phi <= 1.0)) throw DomainError("cheeger_interval: phi must lie in [0, 1]");
    return {0.5 * phi * phi, 2.0 * phi};
}

LinearProbe linear_T_probe(const HamiltonianSystem& system, const Boundary& set, std::vector<double> T_list,
                           const EstimatorConfig& config) {
    if (T_list.empty()) throw std::invalid_argument("linear_T_probe: empty T list");
    for (std::size_t i = 0; i < T_list.size(); ++i) {
        if (!(T_list[i] > 0.0)) throw DomainError("linear_T_probe: T values must be positive");
        if (i > 0 && !(T_list[i] > T_list[i - 1])) throw std::invalid_argument("linear_T_probe: T list must be sorted");
    }
    LinearProbe probe;
    probe.flux_constant = corollary1_bound(system, set, 1.0).normal_mean_positive;
    for (double T : T_list) {
        const auto est = parity_conductance(system, set, T, config);
        LinearProbeRow row;
        row.T = T;
        row.phi = est.phi;
        row.std_error = est.std_error;
        row.phi_over_T = est.phi / T;
        row.se_over_T = est.std_error / T;
        row.ceiling = probe.flux_constant * T;
        row.below_ceiling = est.phi <= row.ceiling + 3.0 * est.std_error;
        row.resample_count = est.resample_count;
        probe.rows.push_back(row);
    }
    probe.smallest_T_relative_error = std::abs(probe.rows.front().phi_over_T - probe.flux_constant) / probe.flux_constant;
    return probe;
}

}  // namespace hmcgap
