#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmcgap/metric.hpp"
#include "hmcgap/targets.hpp"

namespace hmcgap {

struct PhasePoint {
    std::vector<double> q;
    std::vector<double> p;
};

struct PhaseVelocity {
    std::vector<double> dq;
    std::vector<double> dp;
};

enum class HamiltonianKind { isotropic, riemannian };

/// Energy function H(p, q) of either the isotropic or the Riemannian HMC chain.
///
///   isotropic:  H = -log pi(q) + |p|^2 / 2
///   riemannian: H = -log pi(q) + log((2 pi)^d det G(q)) / 2 + p' G(q)^{-1} p / 2
class HamiltonianSystem {
public:
    static HamiltonianSystem isotropic(std::shared_ptr<const TargetDensity> target);
    static HamiltonianSystem riemannian(std::shared_ptr<const TargetDensity> target,
                                        std::shared_ptr<const MetricField> metric);

    HamiltonianKind kind() const { return kind_; }
    std::size_t dim() const { return target_->dim(); }
    const TargetDensity& target() const { return *target_; }
    const std::shared_ptr<const TargetDensity>& target_ptr() const { return target_; }
    const MetricField* metric() const { return metric_.get(); }
    const std::shared_ptr<const MetricField>& metric_ptr() const { return metric_; }

    /// Isotropic systems and Riemannian systems with an identity metric share one flow.
    bool flows_isotropically() const;

    double energy(std::span<const double> q, std::span<const double> p) const;
    double energy(const PhasePoint& x) const { return energy(x.q, x.p); }

    /// (dH/dp, -dH/dq). Throws IntegratorFailure on a non-finite gradient.
    void rhs(std::span<const double> q, std::span<const double> p, std::span<double> dq,
             std::span<double> dp) const;

private:
    HamiltonianSystem(HamiltonianKind kind, std::shared_ptr<const TargetDensity> target,
                      std::shared_ptr<const MetricField> metric);

    HamiltonianKind kind_;
    std::shared_ptr<const TargetDensity> target_;
    std::shared_ptr<const MetricField> metric_;
};

PhaseVelocity hamiltonian_rhs(const HamiltonianSystem& system, const PhasePoint& x);

struct FlowConfig {
    double energy_tolerance = 1e-8;
    double max_step = 0.25;
    /// 5: quintic Hermite in q where d2q/dt2 is available (isotropic), 3: cubic everywhere.
    int dense_output_order = 5;
    double rel_tol = 1e-12;
    double abs_tol = 1e-12;
    /// Step cap factor c in h <= c * (|grad log pi(q)| / (1 + |q|))^{-1/2}.
    double curvature_step_factor = 0.05;
    /// Skip closed-form flows and always integrate numerically.
    bool force_numeric = false;
};

class IntegratorFailure : public std::runtime_error {
public:
    IntegratorFailure(const std::string& what, double last_valid_time)
        : std::runtime_error(what), last_valid_time_(last_valid_time) {}
    double last_valid_time() const { return last_valid_time_; }

private:
    double last_valid_time_;
};

/// Dense solution of Hamilton's equations on [0, T].
///
/// Closed-form pieces are stored as harmonic segments; numerically integrated pieces as
/// accepted step nodes with Hermite interpolation between them. Immutable once built.
class Trajectory {
public:
    enum class Method { harmonic, piecewise_harmonic, numeric };

    struct HarmonicSegment {
        double t0 = 0.0;
        double t1 = 0.0;
        std::vector<double> center;
        std::vector<double> omega;
        std::vector<double> q0;
        std::vector<double> p0;
    };

    Method method() const { return method_; }
    std::size_t dim() const { return dim_; }
    double horizon() const { return horizon_; }
    const PhasePoint& initial() const { return initial_; }
    PhasePoint end() const { return at(horizon_); }

    PhasePoint at(double t) const;
    void position(double t, std::span<double> out) const;
    std::vector<double> position(double t) const;
    /// dq/dt.
    void velocity(double t, std::span<double> out) const;

    /// Segment boundaries (closed form) or accepted step nodes (numeric), starting at 0.
    const std::vector<double>& mesh() const { return mesh_; }
    /// Largest angular frequency of the closed-form segments, 0 for numeric trajectories.
    double max_frequency() const { return max_frequency_; }

    double max_energy_drift() const { return max_energy_drift_; }
    std::size_t rejected_steps() const { return rejected_steps_; }
    /// Right-hand-side evaluations that landed on a point where the gradient is a subgradient.
    std::size_t nonsmooth_evaluations() const { return nonsmooth_evaluations_; }

private:
    friend Trajectory flow(const HamiltonianSystem&, const PhasePoint&, double, const FlowConfig&);

    std::size_t segment_index(double t) const;
    void numeric_eval(double t, std::span<double> q, std::span<double> p, std::span<double> v) const;
    void harmonic_eval(double t, std::span<double> q, std::span<double> p) const;

    Method method_ = Method::harmonic;
    std::size_t dim_ = 0;
    double horizon_ = 0.0;
    PhasePoint initial_;
    std::vector<double> mesh_;
    double max_frequency_ = 0.0;
    double max_energy_drift_ = 0.0;
    std::size_t rejected_steps_ = 0;
    std::size_t nonsmooth_evaluations_ = 0;

    std::vector<HarmonicSegment> segments_;

    // Numeric nodes: state y = (q, p) and f = (dq/dt, dp/dt), row-major per node.
    std::vector<double> y_;
    std::vector<double> f_;
    bool quintic_ = false;
};

/// Closed-form flow of the standard-normal Hamiltonian H = (q^2 + p^2)/2.
PhasePoint exact_flow_gaussian(double q, double p, double T);

/// Integrates Hamilton's equations from `start` for time T >= 0.
///
/// Dispatches to closed-form flows when the target provides a harmonic model and the
/// system flows isotropically; otherwise integrates with an adaptive Runge-Kutta-Fehlberg
/// 7(8) pair. Throws IntegratorFailure on step-size underflow or when the energy drift
/// exceeds config.energy_tolerance.
Trajectory flow(const HamiltonianSystem& system, const PhasePoint& start, double T,
                const FlowConfig& config = {});

struct LinearizationReport {
    double deviation = 0.0;        // max_u |q(u) - q(s) - (u - s) q'(s)|
    double ratio = 0.0;            // deviation / (t - s)^2, 0 when t == s
    double half_sup_accel = 0.0;   // sup_u |d2q/dt2| / 2 along [s, t]
    bool within_bound = true;      // ratio <= half_sup_accel (up to sampling slack)
};

LinearizationReport check_linearization(const Trajectory& trajectory, double s, double t);

}  // namespace hmcgap
