#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hmcgap/dynamics.hpp"
#include "hmcgap/targets.hpp"

namespace hmcgap {

/// Uniform partition of [lo, hi] into bins with their masses under pi.
struct Grid1D {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n_bins = 0;
    std::vector<double> edges;
    std::vector<double> midpoints;
    std::vector<double> masses;
    double total_mass = 0.0;  // mass of [lo, hi]; truncation audit wants >= 1 - 1e-8

    double width() const { return (hi - lo) / static_cast<double>(n_bins); }
    /// Bin containing x, clamped to the edge bins.
    std::size_t bin_of(double x) const;

    static Grid1D uniform(const TargetDensity& target, double lo, double hi, std::size_t n_bins);
    /// [center - n_scales * scale, center + n_scales * scale] around every mode.
    static Grid1D for_target(const TargetDensity& target, std::size_t n_bins = 400, double n_scales = 8.0);
};

struct TransitionMatrix {
    Eigen::MatrixXd K;             // row-stochastic
    std::vector<double> pi;        // stationary weights used for reversibility
    std::string kernel;
    double reversibility_defect = 0.0;      // max |pi_i K_ij - pi_j K_ji| of K as returned
    double raw_reversibility_defect = 0.0;  // same, before symmetrization of the flow quadrature
    double max_row_error = 0.0;             // max |sum_j K_ij - 1|
    bool valid = true;
    std::string failure;
};

struct SpectralResult {
    double lambda2 = 0.0;
    double gap = 0.0;
    std::vector<double> top;       // leading eigenvalues by magnitude (after the unit one)
    double top_residual = 0.0;     // |A v - v| for v = sqrt(pi)
    std::size_t n_bins = 0;
    double refinement_change = 0.0;  // |gap(n) - gap(2n)| when computed
    bool converged = true;
};

/// Density at y of N(x cos T, sin^2 T): the exact HMC kernel for the standard normal.
double degenerate_kernel_density(double x, double y, double T);

/// How momenta are integrated when building a generic HMC matrix.
///   gauss_hermite_nearest: Gauss-Hermite nodes, each node's weight deposited in the
///                          destination bin nearest to the flowed position.
///   cells_linear:          momentum cells of equal width on [-p_max, p_max] with exact
///                          normal mass, the image of each cell spread linearly between the
///                          flowed positions of its two ends.
enum class MomentumRule { gauss_hermite_nearest, cells_linear };

struct HmcMatrixOptions {
    int quad_order = 256;
    /// Gauss-Legendre start points per bin, weighted by pi.
    int start_points = 4;
    MomentumRule rule = MomentumRule::cells_linear;
    double p_max = 8.5;
    FlowConfig flow;
    unsigned workers = 0;
    /// Use the closed-form binned kernel when the target is the standard normal.
    bool exact_for_gaussian = true;
};

/// HMC transition matrix on the grid for a one-dimensional target.
TransitionMatrix hmc_kernel_matrix(const TargetDensity& target, double T, const Grid1D& grid,
                                   const HmcMatrixOptions& options = {});

/// Binned exact kernel for the standard normal: J_ij = P(Q in bin i, Q' in bin j).
TransitionMatrix gaussian_kernel_matrix(double T, const Grid1D& grid);

/// Random-walk Metropolis on the grid: proposal mass of bin j from midpoint x_i times
/// min(1, pi(x_j)/pi(x_i)); rejected mass stays on the diagonal.
TransitionMatrix rwm_kernel_matrix(const TargetDensity& target, double epsilon, const Grid1D& grid);

/// 1 - |lambda_2| of a reversible matrix via the symmetric similarity transform.
SpectralResult spectral_gap(const TransitionMatrix& matrix, std::size_t n_top = 5);

/// Rayleigh-quotient gap bound from f(x) = x for the standard normal: 1 - cos T.
double rayleigh_bound(double T);

/// 1 - <f, K f>_pi / <f, f>_pi for pi-centred f evaluated at the grid midpoints.
double rayleigh_quotient(const TransitionMatrix& matrix, const std::vector<double>& f);

/// Spectral gap on `n_bins` and `2 n_bins`; converged iff they differ by < tol.
SpectralResult refined_gap(const std::function<TransitionMatrix(const Grid1D&)>& build,
                           const std::function<Grid1D(std::size_t)>& grid_for, std::size_t n_bins, double tol = 1e-3);

/// Gap of the two-dimensional N(0, diag(1, sigma^2)) HMC chain: the product of two
/// Gaussian chains with angles T and T / sigma.
SpectralResult degenerate_gaussian_gap(double sigma, double T, std::size_t n_bins = 400);

struct GapCell {
    double a = 0.0;
    double T = 0.0;
    double gap = 0.0;
    double lambda2 = 0.0;
    double refinement_change = 0.0;
    bool converged = true;
};

struct GapSurface {
    std::vector<GapCell> cells;  // a-major order
    /// Per T: least-squares slope of log(gap) against a^2 over the a values > 0 listed.
    std::vector<std::pair<double, double>> slopes;
};

struct GapSurfaceOptions {
    std::size_t n_bins = 400;
    bool check_refinement = true;
    HmcMatrixOptions matrix;
    /// a values entering the log-gap slope fit; empty means all a > 0.
    std::vector<double> slope_a;
};

/// Spectral gaps of HMC on the max-Gaussian family over an (a, T) grid.
GapSurface gap_surface(const std::vector<double>& a_list, const std::vector<double>& T_list,
                       const GapSurfaceOptions& options = {});

}  // namespace hmcgap
