#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hmcgap/boundary.hpp"
#include "hmcgap/dynamics.hpp"
#include "hmcgap/metric.hpp"
#include "hmcgap/rng.hpp"
#include "hmcgap/targets.hpp"

namespace hmcgap {

struct StepOutcome {
    bool accepted = true;      // false only for rejected Metropolis proposals
    bool censored = false;     // trace chains: excursion cap reached
    std::size_t inner_steps = 1;
};

/// One transition X_{t+1} ~ K(X_t, .) drawing all randomness from `rng`.
///
/// Kernels are immutable and may be shared by any number of chains and threads.
class MarkovKernel {
public:
    virtual ~MarkovKernel() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
    virtual const TargetDensity& target() const = 0;
    virtual StepOutcome step(std::span<const double> x, RandomStream& rng, std::span<double> out) const = 0;
};

struct RwmConfig {
    double epsilon = 1.0;
};

/// Random-walk Metropolis with N(0, epsilon^2 I) proposals.
class RwmKernel final : public MarkovKernel {
public:
    RwmKernel(std::shared_ptr<const TargetDensity> target, RwmConfig config);
    std::size_t dim() const override { return target_->dim(); }
    std::string name() const override { return "rwm"; }
    const TargetDensity& target() const override { return *target_; }
    StepOutcome step(std::span<const double> x, RandomStream& rng, std::span<double> out) const override;
    const RwmConfig& config() const { return config_; }

private:
    std::shared_ptr<const TargetDensity> target_;
    RwmConfig config_;
};

struct HmcConfig {
    double T = 1.0;
    FlowConfig flow;
};

/// Idealized HMC: fresh N(0, I) momentum, exact flow for time T, no accept/reject.
class HmcKernel final : public MarkovKernel {
public:
    HmcKernel(std::shared_ptr<const TargetDensity> target, HmcConfig config);
    std::size_t dim() const override { return system_.dim(); }
    std::string name() const override { return "hmc"; }
    const TargetDensity& target() const override { return system_.target(); }
    StepOutcome step(std::span<const double> x, RandomStream& rng, std::span<double> out) const override;
    const HamiltonianSystem& system() const { return system_; }
    const HmcConfig& config() const { return config_; }

private:
    HamiltonianSystem system_;
    HmcConfig config_;
};

/// Covariance of the Riemannian momentum draw.
///
/// inverse_metric draws p ~ N(0, G(q)^{-1}), the rule stated with the algorithm; metric draws
/// p ~ N(0, G(q)), the p-marginal of exp(-H) for the Riemannian energy.
enum class MomentumLaw { inverse_metric, metric };

struct RhmcConfig {
    double T = 1.0;
    FlowConfig flow;
    MomentumLaw momentum = MomentumLaw::inverse_metric;
};

class RhmcKernel final : public MarkovKernel {
public:
    RhmcKernel(std::shared_ptr<const TargetDensity> target, std::shared_ptr<const MetricField> metric,
               RhmcConfig config);
    std::size_t dim() const override { return system_.dim(); }
    std::string name() const override { return "rhmc"; }
    const TargetDensity& target() const override { return system_.target(); }
    StepOutcome step(std::span<const double> x, RandomStream& rng, std::span<double> out) const override;
    const HamiltonianSystem& system() const { return system_; }
    const RhmcConfig& config() const { return config_; }

    /// The momentum draw alone, exposed for covariance checks.
    void draw_momentum(std::span<const double> q, RandomStream& rng, std::span<double> p) const;

private:
    HamiltonianSystem system_;
    RhmcConfig config_;
};

/// Trace of a base chain on S: excursions outside S are run through and not emitted.
class TraceKernel final : public MarkovKernel {
public:
    TraceKernel(std::shared_ptr<const MarkovKernel> base, Boundary set, std::size_t max_excursion = 1000000);
    std::size_t dim() const override { return base_->dim(); }
    std::string name() const override { return "trace(" + base_->name() + ")"; }
    const TargetDensity& target() const override { return base_->target(); }
    /// On a censored excursion the chain stays at x.
    StepOutcome step(std::span<const double> x, RandomStream& rng, std::span<double> out) const override;

private:
    std::shared_ptr<const MarkovKernel> base_;
    Boundary set_;
    std::size_t max_excursion_;
};

/// Single-owner chain position with its (seed, chain) key.
struct ChainState {
    std::vector<double> q;
    std::uint64_t step = 0;
    std::uint64_t chain = 0;
    std::uint64_t seed = 0;
    bool valid = true;
    std::string failure;
};

/// Advances the chain by one step using the stream keyed by (seed, chain, step).
/// Integrator failures invalidate the chain; they are never retried.
StepOutcome advance(const MarkovKernel& kernel, ChainState& state);

ChainState rwm_step(const ChainState& state, const RwmConfig& config, std::shared_ptr<const TargetDensity> target);
ChainState hmc_step(const ChainState& state, const HmcConfig& config, std::shared_ptr<const TargetDensity> target);
ChainState rhmc_step(const ChainState& state, const RhmcConfig& config, std::shared_ptr<const TargetDensity> target,
                     std::shared_ptr<const MetricField> metric);

/// Positions of `n_chains` chains over `n_steps` steps; entry [c][s] is the state after s steps.
/// Starts are exact draws from pi (chain stream, step index 0) unless `start` is given.
std::vector<std::vector<std::vector<double>>> run_chains(const MarkovKernel& kernel, std::size_t n_chains,
                                                         std::size_t n_steps, std::uint64_t seed,
                                                         const std::vector<double>* start = nullptr,
                                                         unsigned workers = 0);

struct HittingTimeSample {
    std::vector<double> start;
    std::uint64_t tau = 0;
    bool censored = false;
    std::uint64_t horizon = 0;
};

/// First step t >= 1 with X_t outside S, censored at `horizon`.
HittingTimeSample hitting_time(const MarkovKernel& kernel, std::span<const double> start, const Boundary& set,
                               std::uint64_t horizon = 100000000, std::uint64_t seed = 0, std::uint64_t chain = 0);

struct DriftEstimate {
    double ratio = 0.0;          // Monte Carlo mean of V(X_1) / V(x)
    double std_error = 0.0;
    double upper_95 = 0.0;       // one-sided 95% upper confidence bound
    double additive_proxy = 0.0; // mean of max(V(X_1) - V(x), 0) / V(x) restricted to increases
    std::size_t n_samples = 0;
    bool in_drift_region = true;
    bool passed = false;         // in region and upper_95 < 1
    std::string status;
};

/// Estimates (K V)(x) / V(x) for V(x) = exp(min_k |x - c_k| / scale), c_k the mode centers.
///
/// Points closer than `tail_radius * scale` to a mode are reported as outside the drift
/// region. `scale` defaults to the target's shape parameter.
DriftEstimate lyapunov_drift(const MarkovKernel& kernel, std::span<const double> x, std::size_t n_samples,
                             std::uint64_t seed = 0, double scale = 0.0, double tail_radius = 1.0,
                             unsigned workers = 0);

}  // namespace hmcgap
