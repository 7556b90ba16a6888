#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "hmcgap/conductance.hpp"
#include "hmcgap/normal.hpp"
#include "hmcgap/samplers.hpp"
#include "hmcgap/spectral.hpp"

using namespace hmcgap;
constexpr double kPi = std::numbers::pi;

namespace {

// Cyclic Jacobi eigenvalues of a symmetric matrix.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd A) {
    const auto n = A.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) ev[i] = A(i, i);
    return ev;
}

// Simpson rule with m (even) panels.
template <class F>
double simpson(F f, double a, double b, int m) {
    const double h = (b - a) / m;
    double s = f(a) + f(b);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

TransitionMatrix from_rows(Eigen::MatrixXd K, std::vector<double> pi) {
    TransitionMatrix m;
    m.K = std::move(K);
    m.pi = std::move(pi);
    return m;
}

}  // namespace

TEST_CASE("grid masses and truncation audit") {
    const Gaussian1D g;
    const auto grid = Grid1D::for_target(g, 400);
    CHECK(grid.lo == doctest::Approx(-8.0));
    CHECK(grid.hi == doctest::Approx(8.0));
    CHECK(grid.total_mass >= 1.0 - 1e-8);
    CHECK(grid.masses[200] == doctest::Approx(std_normal_cdf(0.04) - 0.5).epsilon(1e-12));
    CHECK(grid.bin_of(-100.0) == 0);
    CHECK(grid.bin_of(100.0) == 399);
    CHECK(grid.bin_of(0.01) == 200);
    const GaussianMixture1D mix(0.3);
    CHECK(Grid1D::for_target(mix, 400).total_mass >= 1.0 - 1e-8);
    CHECK_THROWS(Grid1D::uniform(g, 1.0, 0.0, 10));
}

TEST_CASE("degenerate kernel density") {
    CHECK(degenerate_kernel_density(0.0, 0.7, kPi / 2) == doctest::Approx(std_normal_pdf(0.7)).epsilon(1e-14));
    CHECK(degenerate_kernel_density(1.0, std::cos(0.2), 0.2) == doctest::Approx(2.0081).epsilon(1e-4));
    for (double x : {-1.3, 0.2, 2.0})
        for (double y : {-0.4, 1.1})
            CHECK(degenerate_kernel_density(x, y, 0.7) * std_normal_pdf(x) ==
                  doctest::Approx(degenerate_kernel_density(y, x, 0.7) * std_normal_pdf(y)).epsilon(1e-13));
    CHECK_THROWS_AS(degenerate_kernel_density(0.0, 0.0, 0.0), DomainError);
    CHECK_THROWS_AS(degenerate_kernel_density(0.0, 0.0, kPi), DomainError);
}

TEST_CASE("Gaussian matrix rows match the binned exact kernel") {
    const Gaussian1D g;
    const auto grid = Grid1D::for_target(g, 400);
    const double T = 0.5, h = grid.width();
    const auto M = hmc_kernel_matrix(g, T, grid);
    CHECK(M.max_row_error < 1e-10);
    CHECK(M.reversibility_defect < 1e-6);
    for (std::size_t i : {std::size_t{120}, std::size_t{200}, std::size_t{233}, std::size_t{290}}) {
        // P(start in bin i, end in bin j) / P(start in bin i) by 2D Simpson on the density.
        const double a = grid.edges[i], b = grid.edges[i + 1];
        const double mass = simpson([](double x) { return std_normal_pdf(x); }, a, b, 64);
        double tv = 0.0;
        for (std::size_t j = 0; j < grid.n_bins; ++j) {
            const double c = grid.edges[j], d = grid.edges[j + 1];
            const double center = 0.5 * (a + b) * std::cos(T);
            if (std::abs(0.5 * (c + d) - center) > 12.0 * std::sin(T) + h) continue;
            const double joint = simpson(
                [&](double x) {
                    return std_normal_pdf(x) *
                           simpson([&](double y) { return degenerate_kernel_density(x, y, T); }, c, d, 16);
                },
                a, b, 16);
            tv += std::abs(joint / mass - M.K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        CHECK(0.5 * tv < 1e-4);
    }
}

TEST_CASE("zero and quarter-period limits") {
    const MaxGaussian1D g0(0.0);
    const auto grid = Grid1D::for_target(g0, 200);
    const auto still = hmc_kernel_matrix(g0, 1e-7, grid);
    CHECK(still.K.diagonal().minCoeff() > 0.999);
    const auto zero = hmc_kernel_matrix(g0, 0.0, grid);
    CHECK((zero.K - Eigen::MatrixXd::Identity(200, 200)).cwiseAbs().maxCoeff() < 1e-12);

    const auto iid = hmc_kernel_matrix(g0, kPi / 2, grid);
    double spread = 0.0;
    for (Eigen::Index i = 1; i < iid.K.rows(); ++i)
        spread = std::max(spread, (iid.K.row(i) - iid.K.row(0)).cwiseAbs().maxCoeff());
    CHECK(spread < 1e-10);
    CHECK(spectral_gap(iid).gap == doctest::Approx(1.0).epsilon(1e-9));

    HmcMatrixOptions generic;
    generic.exact_for_gaussian = false;
    CHECK(spectral_gap(hmc_kernel_matrix(g0, kPi / 2, Grid1D::for_target(g0, 400), generic)).gap ==
          doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("spectral gap of simple operators") {
    const std::size_t n = 6;
    std::vector<double> uniform(n, 1.0 / n);
    CHECK(spectral_gap(from_rows(Eigen::MatrixXd::Identity(n, n), uniform)).gap == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(spectral_gap(from_rows(Eigen::MatrixXd::Constant(n, n, 1.0 / n), uniform)).gap ==
          doctest::Approx(1.0).epsilon(1e-12));
    // Deterministic swap of two states: lambda2 = -1.
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const auto r = spectral_gap(from_rows(swap, {0.5, 0.5}));
    CHECK(r.lambda2 == doctest::Approx(-1.0));
    CHECK(r.gap == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(spectral_gap(from_rows(0.9 * Eigen::MatrixXd::Identity(n, n), uniform)), DomainError);
    auto bad = from_rows(Eigen::MatrixXd::Identity(n, n), uniform);
    bad.reversibility_defect = 1e-3;
    CHECK_THROWS_AS(spectral_gap(bad), DomainError);
}

TEST_CASE("Mehler eigenvalues and the Rayleigh bound") {
    const Gaussian1D g;
    const auto grid = Grid1D::for_target(g, 400);
    CHECK(rayleigh_bound(0.5) == doctest::Approx(0.122417).epsilon(1e-5));
    CHECK(rayleigh_bound(0.1) == doctest::Approx(0.0049958).epsilon(1e-4));
    CHECK(rayleigh_bound(kPi / 2) == doctest::Approx(1.0).epsilon(1e-15));
    for (double T : {0.1, 0.2, 0.5, 1.0}) {
        const auto M = hmc_kernel_matrix(g, T, grid);
        const auto r = spectral_gap(M);
        CHECK(std::abs(r.gap - (1.0 - std::cos(T))) < 1e-3);
        // The next eigenvalues follow cos(T)^k.
        CHECK(std::abs(r.top[1] - std::pow(std::cos(T), 2)) < 2e-3);
        const double rq = rayleigh_quotient(M, grid.midpoints);
        CHECK(std::abs(rq - rayleigh_bound(T)) < 1e-3);
        CHECK(rq >= r.gap - 1e-3);
        const auto deg = degenerate_gaussian_gap(T, T);
        CHECK(std::abs(deg.gap - (1.0 - std::cos(T))) < 1e-3);
    }
}

TEST_CASE("eigensolver agrees with a Jacobi oracle") {
    const GaussianMixture1D mix(0.5);
    const auto grid = Grid1D::for_target(mix, 120);
    HmcMatrixOptions opt;
    opt.quad_order = 128;
    const auto M = hmc_kernel_matrix(mix, 0.5, grid, opt);
    REQUIRE(M.valid);
    const auto n = M.K.rows();
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = std::sqrt(M.pi[i]);
        for (Eigen::Index j = 0; j < n; ++j) A(i, j) = std::sqrt(M.pi[i] / M.pi[j]) * M.K(i, j);
    }
    A = 0.5 * (A + A.transpose()).eval();
    A -= v * v.transpose() / v.squaredNorm();
    auto ev = jacobi_eigenvalues(A);
    std::sort(ev.begin(), ev.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });
    const auto r = spectral_gap(M);
    CHECK(r.lambda2 == doctest::Approx(ev[0]).epsilon(1e-9));
    CHECK(r.top[2] == doctest::Approx(ev[2]).epsilon(1e-9));
}

TEST_CASE("mixture HMC matrix is reversible, stochastic and converged") {
    const GaussianMixture1D mix(0.4);
    const auto grid = Grid1D::for_target(mix, 400);
    const auto M = hmc_kernel_matrix(mix, 0.4, grid);
    REQUIRE(M.valid);
    CHECK(M.raw_reversibility_defect < 1e-6);
    CHECK(M.reversibility_defect < 1e-12);
    CHECK(M.max_row_error < 1e-10);
    const auto fine = spectral_gap(hmc_kernel_matrix(mix, 0.4, Grid1D::for_target(mix, 800)));
    CHECK(std::abs(spectral_gap(M).gap - fine.gap) < 1e-3);
}

TEST_CASE("integrator failure marks the matrix invalid") {
    const GaussianMixture1D mix(0.5);
    HmcMatrixOptions opt;
    opt.quad_order = 8;
    opt.start_points = 1;
    opt.flow.max_step = 1e-3;
    opt.flow.energy_tolerance = 1e-300;
    opt.flow.curvature_step_factor = 1e-12;
    const auto M = hmc_kernel_matrix(mix, 0.5, Grid1D::for_target(mix, 10), opt);
    CHECK_FALSE(M.valid);
    CHECK_FALSE(M.failure.empty());
}

TEST_CASE("RWM matrix rows against simulation") {
    auto mix = std::make_shared<GaussianMixture1D>(0.5);
    const auto grid = Grid1D::for_target(*mix, 400);
    const auto M = rwm_kernel_matrix(*mix, 0.5, grid);
    CHECK(M.max_row_error < 1e-10);
    CHECK(M.reversibility_defect < 1e-12);
    const std::size_t i = grid.bin_of(-1.0);
    const double x = grid.midpoints[i];
    const RwmKernel kernel(mix, {0.5});
    const std::size_t n = 200000;
    std::size_t stay = 0, cross = 0;
    std::vector<double> q{x}, out(1);
    for (std::size_t k = 0; k < n; ++k) {
        RandomStream rng(5, k, 0);
        kernel.step(q, rng, out);
        stay += grid.bin_of(out[0]) == i;
        cross += out[0] > 0.0;
    }
    const auto row = M.K.row(static_cast<Eigen::Index>(i));
    const double p_stay = row[static_cast<Eigen::Index>(i)];
    const double p_cross = row.tail(200).sum();
    const double se_stay = std::sqrt(p_stay * (1 - p_stay) / n), se_cross = std::sqrt(p_cross * (1 - p_cross) / n);
    CHECK(std::abs(static_cast<double>(stay) / n - p_stay) < 4.0 * se_stay + 2e-3);
    CHECK(std::abs(static_cast<double>(cross) / n - p_cross) < 4.0 * se_cross + 1e-5);

    // Uphill proposals are always accepted: the entry is the bare proposal mass.
    const std::size_t u = grid.bin_of(-2.0), j = u + 3;
    const double h = grid.width();
    CHECK(M.K(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) ==
          doctest::Approx(std_normal_cdf(3.5 * h / 0.5) - std_normal_cdf(2.5 * h / 0.5)).epsilon(1e-12));
}

TEST_CASE("RWM step size limits") {
    const GaussianMixture1D mix(0.5);
    const auto grid = Grid1D::for_target(mix, 400);
    CHECK(spectral_gap(rwm_kernel_matrix(mix, 1e-3, grid)).gap < 1e-4);
    const double wide = spectral_gap(rwm_kernel_matrix(mix, 10.0, grid)).gap;
    const double tuned = spectral_gap(rwm_kernel_matrix(mix, 0.5, grid)).gap;
    CHECK(wide > 0.05);
    CHECK(wide < 0.3);
    CHECK(wide > tuned);
}

TEST_CASE("Cheeger sandwich with the parity conductance") {
    const double sigma = 0.5;
    auto mix = std::make_shared<GaussianMixture1D>(sigma);
    const auto gap = spectral_gap(hmc_kernel_matrix(*mix, sigma, Grid1D::for_target(*mix, 400))).gap;
    EstimatorConfig cfg;
    cfg.n = 40000;
    cfg.seed = 9;
    const auto est = parity_conductance(HamiltonianSystem::isotropic(mix), Boundary::point(0.0), sigma, cfg);
    const double lo = std::max(0.0, est.phi - 3.0 * est.std_error), hi = est.phi + 3.0 * est.std_error;
    CHECK(cheeger_interval(lo).first <= gap);
    CHECK(gap <= cheeger_interval(hi).second);
}

TEST_CASE("gap surface on the max-Gaussian family") {
    GapSurfaceOptions opt;
    opt.check_refinement = false;
    const auto s = gap_surface({0.0, 1.5, 2.0, 2.5}, {1.0, kPi / 2}, opt);
    REQUIRE(s.cells.size() == 8);
    CHECK(s.cells[1].gap == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(s.cells[0].gap == doctest::Approx(1.0 - std::cos(1.0)).epsilon(1e-3));
    for (std::size_t k = 2; k < s.cells.size(); ++k) CHECK(s.cells[k].gap < s.cells[k - 2].gap);
    REQUIRE(s.slopes.size() == 2);
    CHECK(s.slopes[0].second == doctest::Approx(-0.5).epsilon(0.2));
    CHECK_THROWS(gap_surface({2.0, 1.0}, {1.0}, opt));
}
