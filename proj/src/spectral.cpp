#include "hmcgap/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "hmcgap/normal.hpp"
#include "hmcgap/parallel.hpp"
#include "hmcgap/quadrature.hpp"
#include "hmcgap/stats.hpp"

namespace hmcgap {

std::size_t Grid1D::bin_of(double x) const {
    if (!(x > lo)) return 0;
    const double k = std::floor((x - lo) / width());
    if (k >= static_cast<double>(n_bins)) return n_bins - 1;
    return static_cast<std::size_t>(k);
}

Grid1D Grid1D::uniform(const TargetDensity& target, double lo, double hi, std::size_t n_bins) {
    if (target.dim() != 1) throw std::invalid_argument("Grid1D: target must be one-dimensional");
    if (n_bins < 2 || !(hi > lo)) throw std::invalid_argument("Grid1D: need hi > lo and at least two bins");
    Grid1D g;
    g.lo = lo;
    g.hi = hi;
    g.n_bins = n_bins;
    const double h = (hi - lo) / static_cast<double>(n_bins);
    g.edges.resize(n_bins + 1);
    for (std::size_t i = 0; i <= n_bins; ++i) g.edges[i] = lo + h * static_cast<double>(i);
    g.edges.back() = hi;
    g.midpoints.resize(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) g.midpoints[i] = 0.5 * (g.edges[i] + g.edges[i + 1]);

    g.masses.resize(n_bins);
    std::vector<double> cdf(n_bins + 1);
    const auto gl = gauss_legendre(16);
    for (std::size_t i = 0; i <= n_bins; ++i) {
        if (auto m = target.halfspace_mass(0, g.edges[i], Side::below)) {
            cdf[i] = *m;
        } else {
            cdf.clear();
            break;
        }
    }
    if (!cdf.empty()) {
        for (std::size_t i = 0; i < n_bins; ++i) g.masses[i] = std::max(0.0, cdf[i + 1] - cdf[i]);
    } else {
        for (std::size_t i = 0; i < n_bins; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                const double x = g.midpoints[i] + 0.5 * h * gl.nodes[k];
                s += gl.weights[k] * std::exp(target.log_density(std::span<const double>(&x, 1)));
            }
            g.masses[i] = 0.5 * h * s;
        }
    }
    g.total_mass = pairwise_sum(g.masses);
    return g;
}

Grid1D Grid1D::for_target(const TargetDensity& target, std::size_t n_bins, double n_scales) {
    const auto [lo, hi] = target.span(0, n_scales);
    return uniform(target, lo, hi, n_bins);
}

double degenerate_kernel_density(double x, double y, double T) {
    const double s = std::sin(T);
    if (!(T > 0.0 && T < std::numbers::pi) || !(s > 0.0))
        throw DomainError("degenerate_kernel_density: T must lie in (0, pi); the kernel is a point mass otherwise");
    return normal_pdf(y, x * std::cos(T), s);
}

namespace {

double reversibility_defect_of(const Eigen::MatrixXd& K, const std::vector<double>& pi) {
    double d = 0.0;
    const auto n = K.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d = std::max(d, std::abs(pi[i] * K(i, j) - pi[j] * K(j, i)));
    return d;
}

double row_error_of(const Eigen::MatrixXd& K) {
    double e = 0.0;
    for (Eigen::Index i = 0; i < K.rows(); ++i) e = std::max(e, std::abs(K.row(i).sum() - 1.0));
    return e;
}

// Joint bin probabilities J (J_ij = P(start in i, end in j)) to a reversible stochastic matrix.
TransitionMatrix from_joint(Eigen::MatrixXd J, std::string kernel) {
    TransitionMatrix m;
    m.kernel = std::move(kernel);
    const auto n = J.rows();
    double raw = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) raw = std::max(raw, std::abs(J(i, j) - J(j, i)));
    m.raw_reversibility_defect = raw;
    J = 0.5 * (J + J.transpose()).eval();
    const Eigen::VectorXd rows = J.rowwise().sum();
    const double total = rows.sum();
    m.pi.resize(n);
    m.K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        m.pi[i] = rows[i] / total;
        if (rows[i] > 0.0) {
            m.K.row(i) = J.row(i) / rows[i];
        } else {
            m.K(i, i) = 1.0;
        }
    }
    m.reversibility_defect = reversibility_defect_of(m.K, m.pi);
    m.max_row_error = row_error_of(m.K);
    return m;
}

// Fraction of [a, b] (a < b) falling in each bin, added with weight w. Mass outside the
// grid goes to the edge bins.
void spread(const Grid1D& grid, double a, double b, double w, Eigen::Ref<Eigen::RowVectorXd> row) {
    if (!(b - a > 1e-14 * (1.0 + std::abs(a)))) {
        row[static_cast<Eigen::Index>(grid.bin_of(0.5 * (a + b)))] += w;
        return;
    }
    const double len = b - a;
    const std::size_t i0 = grid.bin_of(a), i1 = grid.bin_of(b);
    for (std::size_t k = i0; k <= i1; ++k) {
        const double lo = k == 0 ? -INFINITY : grid.edges[k];
        const double hi = k + 1 == grid.n_bins ? INFINITY : grid.edges[k + 1];
        const double overlap = std::min(b, hi) - std::max(a, lo);
        if (overlap > 0.0) row[static_cast<Eigen::Index>(k)] += w * overlap / len;
    }
}

bool is_standard_normal(const TargetDensity& target) {
    if (target.dim() != 1) return false;
    const auto model = target.harmonic_model();
    if (!model) return false;
    auto unit = [](const HarmonicPiece& p) { return p.center[0] == 0.0 && p.omega[0] == 1.0; };
    return unit(model->below) && (!model->above || unit(*model->above));
}

}  // namespace

TransitionMatrix gaussian_kernel_matrix(double T, const Grid1D& grid) {
    const auto n = static_cast<Eigen::Index>(grid.n_bins);
    const double c = std::cos(T), s = std::sin(T), h = grid.width();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    if (std::abs(s) < 1e-12) {
        // Deterministic map x -> x cos T; deposit by exact bin overlap of the image.
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = grid.edges[i] * c, b = grid.edges[i + 1] * c;
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            spread(grid, std::min(a, b), std::max(a, b), 1.0, row);
            J.row(i) = grid.masses[i] * row;
        }
        return from_joint(std::move(J), "hmc-gaussian-exact");
    }
    const double sa = std::abs(s);
    const int n_gl = std::clamp(static_cast<int>(std::ceil(8.0 * h / sa)) + 8, 8, 128);
    const auto gl = gauss_legendre(n_gl);
    std::vector<double> col(static_cast<std::size_t>(n) + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < n_gl; ++k) {
            const double x = grid.midpoints[i] + 0.5 * h * gl.nodes[k];
            const double w = 0.5 * h * gl.weights[k] * std_normal_pdf(x);
            const double m = x * c;
            // Destination edge bins extend to infinity so every row keeps its full mass.
            col[0] = 0.0;
            col[static_cast<std::size_t>(n)] = 1.0;
            for (Eigen::Index j = 1; j < n; ++j) col[j] = std_normal_cdf((grid.edges[j] - m) / sa);
            for (Eigen::Index j = 0; j < n; ++j) J(i, j) += w * (col[j + 1] - col[j]);
        }
    }
    return from_joint(std::move(J), "hmc-gaussian-exact");
}

TransitionMatrix hmc_kernel_matrix(const TargetDensity& target, double T, const Grid1D& grid,
                                   const HmcMatrixOptions& options) {
    if (target.dim() != 1) throw std::invalid_argument("hmc_kernel_matrix: target must be one-dimensional");
    if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("hmc_kernel_matrix: T must be finite and >= 0");
    if (options.quad_order < 2 || options.start_points < 1)
        throw std::invalid_argument("hmc_kernel_matrix: quad_order >= 2 and start_points >= 1 required");
    if (options.exact_for_gaussian && is_standard_normal(target)) return gaussian_kernel_matrix(T, grid);

    // Non-owning handle for the Hamiltonian system.
    std::shared_ptr<const TargetDensity> handle(&target, [](const TargetDensity*) {});
    const auto system = HamiltonianSystem::isotropic(handle);
    const auto n = static_cast<Eigen::Index>(grid.n_bins);
    const double h = grid.width();
    const auto gl = gauss_legendre(options.start_points);

    // Momentum rule: either nodes with weights, or cell boundaries with cell masses.
    std::vector<double> p_nodes, p_weights;
    if (options.rule == MomentumRule::gauss_hermite_nearest) {
        const auto gh = gauss_hermite_normal(options.quad_order);
        p_nodes = gh.nodes;
        p_weights = gh.weights;
    } else {
        const int m = options.quad_order;
        p_nodes.resize(static_cast<std::size_t>(m) + 1);
        p_weights.resize(static_cast<std::size_t>(m));
        for (int k = 0; k <= m; ++k) p_nodes[k] = -options.p_max + 2.0 * options.p_max * k / m;
        for (int k = 0; k < m; ++k) p_weights[k] = std_normal_cdf(p_nodes[k + 1]) - std_normal_cdf(p_nodes[k]);
        // Momentum tails beyond +-p_max join the outermost cells.
        p_weights.front() += std_normal_cdf(-options.p_max);
        p_weights.back() += std_normal_cdf(-options.p_max);
    }

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::string> failures(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), options.workers, [&](std::size_t i) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        std::vector<double> ends(p_nodes.size());
        try {
            for (int s = 0; s < options.start_points; ++s) {
                const double x = grid.midpoints[i] + 0.5 * h * gl.nodes[s];
                const double wx =
                    0.5 * h * gl.weights[s] * std::exp(target.log_density(std::span<const double>(&x, 1)));
                for (std::size_t k = 0; k < p_nodes.size(); ++k) {
                    const PhasePoint start{{x}, {p_nodes[k]}};
                    ends[k] = T == 0.0 ? x : flow(system, start, T, options.flow).end().q[0];
                }
                if (options.rule == MomentumRule::gauss_hermite_nearest) {
                    for (std::size_t k = 0; k < ends.size(); ++k)
                        row[static_cast<Eigen::Index>(grid.bin_of(ends[k]))] += wx * p_weights[k];
                } else {
                    for (std::size_t k = 0; k + 1 < ends.size(); ++k)
                        spread(grid, std::min(ends[k], ends[k + 1]), std::max(ends[k], ends[k + 1]), wx * p_weights[k],
                               row);
                }
            }
        } catch (const IntegratorFailure& e) {
            failures[i] = e.what();
        }
        J.row(static_cast<Eigen::Index>(i)) = row;
    });
    auto m = from_joint(std::move(J), options.rule == MomentumRule::gauss_hermite_nearest ? "hmc-gh-nearest"
                                                                                         : "hmc-cells-linear");
    for (const auto& f : failures) {
        if (!f.empty()) {
            m.valid = false;
            m.failure = f;
            break;
        }
    }
    return m;
}

TransitionMatrix rwm_kernel_matrix(const TargetDensity& target, double epsilon, const Grid1D& grid) {
    if (target.dim() != 1) throw std::invalid_argument("rwm_kernel_matrix: target must be one-dimensional");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("rwm_kernel_matrix: epsilon must be positive");
    const auto n = static_cast<Eigen::Index>(grid.n_bins);
    const double h = grid.width();
    std::vector<double> logpi(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) logpi[i] = target.log_density(std::span<const double>(&grid.midpoints[i], 1));
    const double top = *std::max_element(logpi.begin(), logpi.end());

    // Proposal mass from a midpoint to bin j depends only on j - i on a uniform grid.
    std::vector<double> offset_mass(2 * static_cast<std::size_t>(n) - 1);
    for (Eigen::Index d = -(n - 1); d <= n - 1; ++d) {
        const double lo = (static_cast<double>(d) - 0.5) * h / epsilon, hi = (static_cast<double>(d) + 0.5) * h / epsilon;
        offset_mass[d + n - 1] = lo > 0.0 ? std_normal_cdf(-lo) - std_normal_cdf(-hi) : std_normal_cdf(hi) - std_normal_cdf(lo);
    }

    TransitionMatrix m;
    m.kernel = "rwm";
    m.K = Eigen::MatrixXd::Zero(n, n);
    m.pi.resize(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += (m.pi[i] = std::exp(logpi[i] - top));
    for (auto& w : m.pi) w /= total;
    for (Eigen::Index i = 0; i < n; ++i) {
        double moved = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double acc = std::min(1.0, std::exp(logpi[j] - logpi[i]));
            const double v = offset_mass[j - i + n - 1] * acc;
            m.K(i, j) = v;
            moved += v;
        }
        m.K(i, i) = 1.0 - moved;
    }
    m.reversibility_defect = reversibility_defect_of(m.K, m.pi);
    m.raw_reversibility_defect = m.reversibility_defect;
    m.max_row_error = row_error_of(m.K);
    return m;
}

SpectralResult spectral_gap(const TransitionMatrix& matrix, std::size_t n_top) {
    if (matrix.reversibility_defect > 1e-6)
        throw DomainError("spectral_gap: kernel is not reversible (defect " + std::to_string(matrix.reversibility_defect) +
                          ")");
    // Bins with no stationary mass carry no L2(pi) functions.
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < matrix.pi.size(); ++i)
        if (matrix.pi[i] > 1e-300) keep.push_back(static_cast<Eigen::Index>(i));
    const auto n = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd v(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const double pa = matrix.pi[keep[a]];
        v[a] = std::sqrt(pa);
        for (Eigen::Index b = 0; b < n; ++b) {
            const double pb = matrix.pi[keep[b]];
            A(a, b) = std::sqrt(pa / pb) * matrix.K(keep[a], keep[b]);
        }
    }
    A = 0.5 * (A + A.transpose()).eval();
    v /= v.norm();

    SpectralResult r;
    r.n_bins = matrix.pi.size();
    r.top_residual = (A * v - v).cwiseAbs().maxCoeff();
    if (r.top_residual > 1e-6) throw DomainError("spectral_gap: top eigenvalue differs from 1 (stochasticity failure)");

    A -= v * v.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw DomainError("spectral_gap: eigensolver did not converge");
    std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
    std::sort(ev.begin(), ev.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });
    r.lambda2 = std::clamp(ev.front(), -1.0, 1.0);
    r.gap = 1.0 - std::abs(r.lambda2);
    r.top.assign(ev.begin(), ev.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(n_top, ev.size())));
    return r;
}

double rayleigh_bound(double T) {
    if (!std::isfinite(T)) throw DomainError("rayleigh_bound: T must be finite");
    return 1.0 - std::cos(T);
}

double rayleigh_quotient(const TransitionMatrix& matrix, const std::vector<double>& f) {
    const auto n = static_cast<Eigen::Index>(matrix.pi.size());
    if (static_cast<Eigen::Index>(f.size()) != n) throw std::invalid_argument("rayleigh_quotient: size mismatch");
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean += matrix.pi[i] * f[i];
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = f[i] - mean;
    const Eigen::VectorXd Kg = matrix.K * g;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        num += matrix.pi[i] * g[i] * Kg[i];
        den += matrix.pi[i] * g[i] * g[i];
    }
    if (!(den > 0.0)) throw DomainError("rayleigh_quotient: f is constant under pi");
    return 1.0 - num / den;
}

SpectralResult refined_gap(const std::function<TransitionMatrix(const Grid1D&)>& build,
                           const std::function<Grid1D(std::size_t)>& grid_for, std::size_t n_bins, double tol) {
    auto coarse = spectral_gap(build(grid_for(n_bins)));
    const auto fine = spectral_gap(build(grid_for(2 * n_bins)));
    coarse.refinement_change = std::abs(coarse.gap - fine.gap);
    coarse.converged = coarse.refinement_change < tol;
    return coarse;
}

SpectralResult degenerate_gaussian_gap(double sigma, double T, std::size_t n_bins) {
    if (!(sigma > 0.0)) throw DomainError("degenerate_gaussian_gap: sigma must be positive");
    // Each coordinate is a standard-normal chain after scaling; the narrow one turns at angle T / sigma.
    const Gaussian1D g;
    const auto grid = Grid1D::for_target(g, n_bins);
    auto wide = spectral_gap(gaussian_kernel_matrix(T, grid));
    const auto narrow = spectral_gap(gaussian_kernel_matrix(T / sigma, grid));
    if (narrow.gap < wide.gap) {
        wide.lambda2 = narrow.lambda2;
        wide.gap = narrow.gap;
    }
    std::vector<double> all = wide.top;
    all.insert(all.end(), narrow.top.begin(), narrow.top.end());
    std::sort(all.begin(), all.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });
    all.resize(std::min(all.size(), wide.top.size()));
    wide.top = all;
    return wide;
}

GapSurface gap_surface(const std::vector<double>& a_list, const std::vector<double>& T_list,
                       const GapSurfaceOptions& options) {
    if (a_list.empty() || T_list.empty()) throw std::invalid_argument("gap_surface: empty parameter list");
    if (!std::is_sorted(a_list.begin(), a_list.end()) || !std::is_sorted(T_list.begin(), T_list.end()))
        throw std::invalid_argument("gap_surface: lists must be sorted");
    GapSurface out;
    for (double a : a_list) {
        const MaxGaussian1D target(a);
        const auto grid = Grid1D::for_target(target, options.n_bins);
        const auto fine = options.check_refinement ? Grid1D::for_target(target, 2 * options.n_bins) : Grid1D{};
        for (double T : T_list) {
            GapCell cell;
            cell.a = a;
            cell.T = T;
            const auto r = spectral_gap(hmc_kernel_matrix(target, T, grid, options.matrix));
            cell.gap = r.gap;
            cell.lambda2 = r.lambda2;
            if (options.check_refinement) {
                const auto rf = spectral_gap(hmc_kernel_matrix(target, T, fine, options.matrix));
                cell.refinement_change = std::abs(rf.gap - r.gap);
                cell.converged = cell.refinement_change < 1e-3;
            }
            out.cells.push_back(cell);
        }
    }
    for (double T : T_list) {
        std::vector<double> x, y;
        for (const auto& c : out.cells) {
            if (c.T != T || !(c.a > 0.0) || !(c.gap > 0.0)) continue;
            if (!options.slope_a.empty() &&
                std::find(options.slope_a.begin(), options.slope_a.end(), c.a) == options.slope_a.end())
                continue;
            x.push_back(c.a * c.a);
            y.push_back(std::log(c.gap));
        }
        if (x.size() >= 2) out.slopes.emplace_back(T, fit_line(x, y).slope);
    }
    return out;
}

}  // namespace hmcgap
