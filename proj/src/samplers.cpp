#include "hmcgap/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmcgap/parallel.hpp"

namespace hmcgap {

namespace {

// Stream step index reserved for initial draws, so they never collide with transitions.
constexpr std::uint64_t kInitialDrawStep = std::numeric_limits<std::uint64_t>::max();

}  // namespace

// ----------------------------------------------------------------------- RWM

RwmKernel::RwmKernel(std::shared_ptr<const TargetDensity> target, RwmConfig config)
    : target_(std::move(target)), config_(config) {
    if (!target_) throw std::invalid_argument("RwmKernel: null target");
    if (!(config_.epsilon > 0.0) || !std::isfinite(config_.epsilon)) throw DomainError("RwmKernel: epsilon must be > 0");
}

StepOutcome RwmKernel::step(std::span<const double> x, RandomStream& rng, std::span<double> out) const {
    const std::size_t d = dim();
    std::vector<double> y(d);
    rng.fill_normal(y);
    for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + config_.epsilon * y[i];
    const double log_ratio = target_->log_density(y) - target_->log_density(x);
    const double u = rng.uniform();
    StepOutcome outcome;
    outcome.accepted = std::log(u) < log_ratio;
    if (outcome.accepted)
        std::copy(y.begin(), y.end(), out.begin());
    else
        std::copy(x.begin(), x.end(), out.begin());
    return outcome;
}

// ----------------------------------------------------------------------- HMC

HmcKernel::HmcKernel(std::shared_ptr<const TargetDensity> target, HmcConfig config)
    : system_(HamiltonianSystem::isotropic(std::move(target))), config_(config) {
    if (!(config_.T >= 0.0) || !std::isfinite(config_.T)) throw DomainError("HmcKernel: T must be finite and >= 0");
}

StepOutcome HmcKernel::step(std::span<const double> x, RandomStream& rng, std::span<double> out) const {
    PhasePoint start{std::vector<double>(x.begin(), x.end()), std::vector<double>(dim())};
    rng.fill_normal(start.p);
    if (config_.T == 0.0) {
        std::copy(x.begin(), x.end(), out.begin());
        return {};
    }
    const auto traj = flow(system_, start, config_.T, config_.flow);
    traj.position(config_.T, out);
    return {};
}

// ---------------------------------------------------------------------- RHMC

RhmcKernel::RhmcKernel(std::shared_ptr<const TargetDensity> target, std::shared_ptr<const MetricField> metric,
                       RhmcConfig config)
    : system_(HamiltonianSystem::riemannian(std::move(target), std::move(metric))), config_(config) {
    if (!(config_.T >= 0.0) || !std::isfinite(config_.T)) throw DomainError("RhmcKernel: T must be finite and >= 0");
}

void RhmcKernel::draw_momentum(std::span<const double> q, RandomStream& rng, std::span<double> p) const {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    Eigen::VectorXd out;
    if (system_.metric()->is_identity()) {
        out = z;
    } else {
        const Eigen::MatrixXd g = system_.metric()->G(q);
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success)
            throw MetricError("metric is not positive definite", std::vector<double>(q.begin(), q.end()));
        if (config_.momentum == MomentumLaw::inverse_metric)
            out = llt.matrixU().solve(z);  // L^{-T} z has covariance G^{-1}
        else
            out = llt.matrixL() * z;
    }
    for (Eigen::Index i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = out[i];
}

StepOutcome RhmcKernel::step(std::span<const double> x, RandomStream& rng, std::span<double> out) const {
    PhasePoint start{std::vector<double>(x.begin(), x.end()), std::vector<double>(dim())};
    draw_momentum(x, rng, start.p);
    if (config_.T == 0.0) {
        std::copy(x.begin(), x.end(), out.begin());
        return {};
    }
    const auto traj = flow(system_, start, config_.T, config_.flow);
    traj.position(config_.T, out);
    return {};
}

// --------------------------------------------------------------------- trace

TraceKernel::TraceKernel(std::shared_ptr<const MarkovKernel> base, Boundary set, std::size_t max_excursion)
    : base_(std::move(base)), set_(std::move(set)), max_excursion_(max_excursion) {
    if (!base_) throw std::invalid_argument("TraceKernel: null base kernel");
    if (max_excursion_ == 0) throw std::invalid_argument("TraceKernel: max_excursion must be >= 1");
    if (set_mass(base_->target(), set_) <= 0.0) throw DomainError("TraceKernel: set has zero mass");
}

StepOutcome TraceKernel::step(std::span<const double> x, RandomStream& rng, std::span<double> out) const {
    std::vector<double> cur(x.begin(), x.end()), next(x.size());
    StepOutcome outcome;
    outcome.inner_steps = 0;
    for (std::size_t k = 0; k < max_excursion_; ++k) {
        base_->step(cur, rng, next);
        ++outcome.inner_steps;
        if (set_.in_set(next)) {
            std::copy(next.begin(), next.end(), out.begin());
            return outcome;
        }
        std::swap(cur, next);
    }
    outcome.censored = true;
    std::copy(x.begin(), x.end(), out.begin());
    return outcome;
}

// -------------------------------------------------------------------- chains

StepOutcome advance(const MarkovKernel& kernel, ChainState& state) {
    if (!state.valid) throw std::logic_error("advance: chain is invalid: " + state.failure);
    RandomStream rng(state.seed, state.chain, state.step);
    std::vector<double> next(state.q.size());
    try {
        const auto outcome = kernel.step(state.q, rng, next);
        state.q = std::move(next);
        ++state.step;
        return outcome;
    } catch (const IntegratorFailure& e) {
        state.valid = false;
        state.failure = e.what();
    } catch (const MetricError& e) {
        state.valid = false;
        state.failure = e.what();
    }
    return {};
}

namespace {

ChainState stepped(const MarkovKernel& kernel, const ChainState& state) {
    ChainState next = state;
    advance(kernel, next);
    return next;
}

}  // namespace

ChainState rwm_step(const ChainState& state, const RwmConfig& config, std::shared_ptr<const TargetDensity> target) {
    return stepped(RwmKernel(std::move(target), config), state);
}

ChainState hmc_step(const ChainState& state, const HmcConfig& config, std::shared_ptr<const TargetDensity> target) {
    return stepped(HmcKernel(std::move(target), config), state);
}

ChainState rhmc_step(const ChainState& state, const RhmcConfig& config, std::shared_ptr<const TargetDensity> target,
                     std::shared_ptr<const MetricField> metric) {
    return stepped(RhmcKernel(std::move(target), std::move(metric), config), state);
}

std::vector<std::vector<std::vector<double>>> run_chains(const MarkovKernel& kernel, std::size_t n_chains,
                                                         std::size_t n_steps, std::uint64_t seed,
                                                         const std::vector<double>* start, unsigned workers) {
    if (start && start->size() != kernel.dim()) throw std::invalid_argument("run_chains: start dimension mismatch");
    std::vector<std::vector<std::vector<double>>> paths(n_chains);
    parallel_for(n_chains, workers, [&](std::size_t c) {
        ChainState st;
        st.seed = seed;
        st.chain = c;
        st.q.resize(kernel.dim());
        if (start) {
            st.q = *start;
        } else {
            RandomStream init(seed, c, kInitialDrawStep);
            kernel.target().sample(init, st.q);
        }
        auto& path = paths[c];
        path.reserve(n_steps + 1);
        path.push_back(st.q);
        for (std::size_t s = 0; s < n_steps; ++s) {
            advance(kernel, st);
            if (!st.valid) throw IntegratorFailure("chain " + std::to_string(c) + ": " + st.failure, 0.0);
            path.push_back(st.q);
        }
    });
    return paths;
}

// ------------------------------------------------------------------- hitting

HittingTimeSample hitting_time(const MarkovKernel& kernel, std::span<const double> start, const Boundary& set,
                               std::uint64_t horizon, std::uint64_t seed, std::uint64_t chain) {
    if (horizon == 0) throw std::invalid_argument("hitting_time: horizon must be >= 1");
    if (!set.in_set(start)) throw std::invalid_argument("hitting_time: start must lie in S");
    HittingTimeSample out;
    out.start.assign(start.begin(), start.end());
    out.horizon = horizon;
    ChainState st;
    st.q = out.start;
    st.seed = seed;
    st.chain = chain;
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        advance(kernel, st);
        if (!st.valid) throw IntegratorFailure("hitting_time: " + st.failure, 0.0);
        if (!set.in_set(st.q)) {
            out.tau = t;
            return out;
        }
    }
    out.tau = horizon;
    out.censored = true;
    return out;
}

// --------------------------------------------------------------------- drift

DriftEstimate lyapunov_drift(const MarkovKernel& kernel, std::span<const double> x, std::size_t n_samples,
                             std::uint64_t seed, double scale, double tail_radius, unsigned workers) {
    if (n_samples < 2) throw std::invalid_argument("lyapunov_drift: need at least two samples");
    if (scale == 0.0) scale = kernel.target().shape_parameter();
    if (!(scale > 0.0)) throw DomainError("lyapunov_drift: scale must be positive");
    const auto centers = kernel.target().mode_centers();
    auto log_v = [&](std::span<const double> q) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) {
            double s = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) s += (q[i] - c[i]) * (q[i] - c[i]);
            best = std::min(best, std::sqrt(s));
        }
        return best / scale;
    };
    const double lv0 = log_v(x);

    std::vector<double> ratios(n_samples), increases(n_samples);
    parallel_for(n_samples, workers, [&](std::size_t k) {
        RandomStream rng(seed, k, 0);
        std::vector<double> next(x.size());
        kernel.step(x, rng, next);
        const double r = std::exp(log_v(next) - lv0);
        ratios[k] = r;
        increases[k] = std::max(r - 1.0, 0.0);
    });
    DriftEstimate est;
    est.n_samples = n_samples;
    const double n = static_cast<double>(n_samples);
    est.ratio = pairwise_sum(ratios) / n;
    std::vector<double> sq(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) sq[k] = (ratios[k] - est.ratio) * (ratios[k] - est.ratio);
    est.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    est.upper_95 = est.ratio + 1.6448536269514722 * est.std_error;
    est.additive_proxy = pairwise_sum(increases) / n;
    est.in_drift_region = lv0 >= tail_radius;
    est.passed = est.in_drift_region && est.upper_95 < 1.0;
    est.status = !est.in_drift_region ? "outside drift region" : (est.passed ? "contracting" : "not contracting");
    return est;
}

}  // namespace hmcgap
