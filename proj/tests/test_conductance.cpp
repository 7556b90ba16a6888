#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "hmcgap/conductance.hpp"
#include "hmcgap/normal.hpp"

using namespace hmcgap;
constexpr double kPi = std::numbers::pi;

namespace {

EstimatorConfig cfg(std::size_t n, std::uint64_t seed) {
    EstimatorConfig c;
    c.n = n;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("direct conductance of the Gaussian rotation kernel") {
    auto g = std::make_shared<Gaussian1D>();
    const auto S = Boundary::point(0.0);
    // Orthant oracle: P(X > 0, X cos T + Z sin T < 0) = T / (2 pi), normalized by pi(S) = 1/2.
    const auto est = direct_conductance(HmcKernel(g, {0.5}), S, 100000, 1);
    CHECK(std::abs(est.phi - 0.5 / kPi) < 3.0 * est.std_error);
    CHECK(direct_conductance(HmcKernel(g, {0.0}), S, 1000, 1).phi == 0.0);
    const auto iid = direct_conductance(HmcKernel(g, {kPi / 2}), S, 100000, 2);
    CHECK(std::abs(iid.phi - 0.5) < 3.0 * iid.std_error);
    CHECK_THROWS_AS(direct_conductance(HmcKernel(g, {0.5}), Boundary::point(-40.0), 100, 1), DomainError);
}

TEST_CASE("parity conductance on the Gaussian") {
    auto sys = HamiltonianSystem::isotropic(std::make_shared<Gaussian1D>());
    const auto S = Boundary::point(0.0);
    const auto est = parity_conductance(sys, S, 0.5, cfg(100000, 3));
    CHECK(std::abs(est.phi - 0.5 / kPi) < 3.0 * est.std_error);
    CHECK(*est.identity_residual <= 1e-12);
    CHECK(est.resample_count == 0);
    // Rice formula: mean crossings T / pi.
    const auto long_run = parity_conductance(sys, S, 2 * kPi, cfg(20000, 4));
    CHECK(*long_run.mean_crossings == doctest::Approx(2.0).epsilon(0.02));
    CHECK(long_run.phi <= 1.0);
    CHECK(*long_run.identity_residual <= 1e-12);
}

TEST_CASE("parity and direct agree on the mixture") {
    auto target = std::make_shared<GaussianMixture1D>(0.5);
    auto sys = HamiltonianSystem::isotropic(target);
    const auto S = Boundary::point(0.0);
    const auto par = parity_conductance(sys, S, 0.5, cfg(40000, 5));
    const auto dir = direct_conductance(HmcKernel(target, {0.5}), S, 40000, 6);
    CHECK(std::abs(par.phi - dir.phi) < 3.0 * std::hypot(par.std_error, dir.std_error));
    const auto bound = corollary1_bound(sys, S, 0.5);
    CHECK(par.phi > 0.0);
    CHECK(par.phi <= bound.normal_mean_positive + 3.0 * par.std_error);
    CHECK(par.phi <= bound.paper_half);
}

TEST_CASE("flux quadrature values") {
    auto gsys = HamiltonianSystem::isotropic(std::make_shared<Gaussian1D>());
    const auto S = Boundary::point(0.0);
    CHECK(flux_quadrature(gsys, S, 0.5, FluxConvention::normal_mean_positive).phi_plus ==
          doctest::Approx(0.5 / (2 * kPi)).epsilon(1e-13));
    auto msys = HamiltonianSystem::isotropic(std::make_shared<GaussianMixture1D>(0.5));
    // 1/2 * T * pi(0) with pi(0) = exp(-2) / (0.5 sqrt(2 pi)).
    const double pi0 = std::exp(-2.0) / (0.5 * kSqrt2Pi);
    CHECK(flux_quadrature(msys, S, 0.5, FluxConvention::paper_half).phi_plus == doctest::Approx(0.25 * pi0).epsilon(1e-13));
    CHECK(0.25 * pi0 == doctest::Approx(0.02700).epsilon(1e-3));
    CHECK(flux_quadrature(msys, S, 0.0, FluxConvention::paper_half).phi_plus == 0.0);
    const auto b = corollary1_bound(gsys, S, 0.5);
    CHECK(b.paper_half == doctest::Approx(0.5 * kInvSqrt2Pi * 0.5 / 0.5).epsilon(1e-13));
    CHECK(b.paper_half / b.normal_mean_positive == doctest::Approx(0.5 * kSqrt2Pi).epsilon(1e-13));
}

TEST_CASE("flux quadrature over a line in the plane") {
    auto sys = HamiltonianSystem::isotropic(std::make_shared<IsotropicMixtureD>(2, 0.5));
    const auto S = Boundary::hyperplane({1.0, 0.0}, 0.0);
    const double expect = 0.7 * kInvSqrt2Pi * std::exp(-2.0) / (0.5 * kSqrt2Pi);
    CHECK(flux_quadrature(sys, S, 0.7, FluxConvention::normal_mean_positive).phi_plus == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("crossing-count flux matches the corrected quadrature") {
    auto sys = HamiltonianSystem::isotropic(std::make_shared<GaussianMixture1D>(0.5));
    const auto S = Boundary::point(0.0);
    const auto mc = flux_monte_carlo(sys, S, 0.5, cfg(200000, 8));
    const auto quad = flux_quadrature(sys, S, 0.5, FluxConvention::normal_mean_positive);
    CHECK(std::abs(mc.phi_plus - quad.phi_plus) < 3.0 * mc.std_error);
}

TEST_CASE("Cheeger interval") {
    const auto [lo, hi] = cheeger_interval(0.1);
    CHECK(lo == doctest::Approx(0.005));
    CHECK(hi == doctest::Approx(0.2));
    CHECK(cheeger_interval(0.0) == std::pair<double, double>{0.0, 0.0});
    CHECK_THROWS_AS(cheeger_interval(1.5), DomainError);
}

TEST_CASE("small-T conductance approaches the flux constant") {
    auto sys = HamiltonianSystem::isotropic(std::make_shared<Gaussian1D>());
    const auto probe = linear_T_probe(sys, Boundary::point(0.0), {0.05, 0.1, 0.2, 2 * kPi}, cfg(200000, 9));
    CHECK(probe.flux_constant == doctest::Approx(1.0 / kPi).epsilon(1e-13));
    for (const auto& r : probe.rows) CHECK(r.below_ceiling);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(probe.rows[i].phi_over_T - 1.0 / kPi) < 3.0 * probe.rows[i].se_over_T);
    CHECK(probe.rows[3].phi_over_T < probe.rows[1].phi_over_T);
}

TEST_CASE("reflection symmetry") {
    auto sys = HamiltonianSystem::isotropic(std::make_shared<GaussianMixture1D>(0.45));
    const auto left = parity_conductance(sys, Boundary::point(0.0), 0.45, cfg(40000, 10));
    const auto right = parity_conductance(sys, Boundary::hyperplane({-1.0}, 0.0), 0.45, cfg(40000, 11));
    CHECK(std::abs(left.phi - right.phi) < 3.0 * std::hypot(left.std_error, right.std_error));
}

TEST_CASE("riemannian system with identity metric gives the isotropic flux") {
    auto target = std::make_shared<GaussianMixture1D>(0.5);
    auto rie = HamiltonianSystem::riemannian(target, std::make_shared<IdentityMetric>(1));
    auto iso = HamiltonianSystem::isotropic(target);
    const auto S = Boundary::point(0.0);
    CHECK(flux_quadrature(rie, S, 0.5, FluxConvention::normal_mean_positive).phi_plus ==
          flux_quadrature(iso, S, 0.5, FluxConvention::normal_mean_positive).phi_plus);
    CHECK(parity_conductance(rie, S, 0.5, cfg(2000, 12)).phi == parity_conductance(iso, S, 0.5, cfg(2000, 12)).phi);
}
