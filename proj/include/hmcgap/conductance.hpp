#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmcgap/boundary.hpp"
#include "hmcgap/dynamics.hpp"
#include "hmcgap/samplers.hpp"

namespace hmcgap {

enum class ConductanceMethod { direct, parity, flux_bound };
enum class FluxMethod { mc_halfN, quadrature_general, quadrature_paper_simple };

/// Constant c* multiplying T * integral of pi over the boundary.
///   paper_half:            c* = 1/2
///   normal_mean_positive:  c* = E[max(p_q, 0)] = 1/sqrt(2 pi) for unit-variance normal momentum
enum class FluxConvention { paper_half, normal_mean_positive };

std::string to_string(ConductanceMethod m);
std::string to_string(FluxMethod m);
std::string to_string(FluxConvention c);

struct ConductanceEstimate {
    double phi = 0.0;
    double std_error = 0.0;
    ConductanceMethod method = ConductanceMethod::direct;
    std::size_t n_samples = 0;
    std::size_t resample_count = 0;

    // Parity decomposition (method == parity).
    std::optional<double> flux_plus;           // 1/2 * mean N
    std::optional<double> odd_probability;     // P(N odd)
    std::optional<double> pi_S;
    std::optional<double> mean_crossings;      // mean N
    std::optional<double> tilted_expectation;  // P(N odd) / mean N
    std::optional<double> identity_residual;   // |flux_plus * tilted / pi_S - phi|

    std::vector<std::string> warnings;
};

struct FluxEstimate {
    double phi_plus = 0.0;
    double std_error = 0.0;  // 0 for quadrature
    FluxMethod method = FluxMethod::quadrature_general;
    FluxConvention convention = FluxConvention::normal_mean_positive;
};

struct EstimatorConfig {
    std::size_t n = 100000;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    double refine_tol = 1e-10;
    /// Attempts per sample before a tangential configuration is reported as an error.
    std::size_t max_resamples = 64;
    FlowConfig flow;
    /// Momentum law of the stationary pair for Riemannian systems.
    MomentumLaw momentum = MomentumLaw::metric;
};

/// Fraction of pi|_S-distributed starts that leave S in one kernel step.
ConductanceEstimate direct_conductance(const MarkovKernel& kernel, const Boundary& set, std::size_t n,
                                       std::uint64_t seed, unsigned workers = 0);

/// Phi = P(N odd) / (2 pi(S)) from crossing counts of stationary Hamiltonian paths.
ConductanceEstimate parity_conductance(const HamiltonianSystem& system, const Boundary& set, double T,
                                       const EstimatorConfig& config = {});

/// 1/2 * mean crossing count on a fresh stationary sample.
FluxEstimate flux_monte_carlo(const HamiltonianSystem& system, const Boundary& set, double T,
                              const EstimatorConfig& config = {});

/// T * integral over the boundary of pi(q) c*(q) dq.
FluxEstimate flux_quadrature(const HamiltonianSystem& system, const Boundary& set, double T,
                             FluxConvention convention);

struct Corollary1Bound {
    double paper_half = 0.0;
    double normal_mean_positive = 0.0;
    double pi_S = 0.0;
};

/// Phi+ / pi(S) under both flux conventions.
Corollary1Bound corollary1_bound(const HamiltonianSystem& system, const Boundary& set, double T);

/// (phi^2 / 2, 2 phi).
std::pair<double, double> cheeger_interval(double phi);

struct LinearProbeRow {
    double T = 0.0;
    double phi = 0.0;
    double std_error = 0.0;
    double phi_over_T = 0.0;
    double se_over_T = 0.0;
    double ceiling = 0.0;          // corrected flux ceiling at this T
    bool below_ceiling = false;    // phi <= ceiling + 3 SE
    std::size_t resample_count = 0;
};

struct LinearProbe {
    std::vector<LinearProbeRow> rows;
    double flux_constant = 0.0;              // corrected bound / T, the T -> 0 limit of Phi / T
    double smallest_T_relative_error = 0.0;  // |phi/T - flux_constant| / flux_constant at min T
};

LinearProbe linear_T_probe(const HamiltonianSystem& system, const Boundary& set, std::vector<double> T_list,
                           const EstimatorConfig& config = {});

}  // namespace hmcgap
