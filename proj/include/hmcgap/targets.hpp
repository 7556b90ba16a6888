#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hmcgap/rng.hpp"

namespace hmcgap {

/// Raised for non-finite inputs and invalid parameters.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class Side { below, above };

/// Law of a scalar projection <n, Q> of a built-in target, as a finite Gaussian mixture.
struct ProjectedMixture {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sds;

    double cdf(double x) const;
    double pdf(double x) const;
};

/// On a piece, log pi(q) = const - 1/2 sum_i omega_i^2 (q_i - center_i)^2.
struct HarmonicPiece {
    std::vector<double> center;
    std::vector<double> omega;
};

/// Targets whose Hamiltonian flow is available in closed form. When `above` is set,
/// `below` applies on q[0] < 0 and `above` on q[0] > 0 (continuous potential with a
/// kink on the hyperplane q[0] = 0).
struct HarmonicModel {
    HarmonicPiece below;
    std::optional<HarmonicPiece> above;
};

/// A smooth probability density on R^d with exact gradient.
///
/// Implementations are immutable after construction and safe to share across threads.
class TargetDensity {
public:
    virtual ~TargetDensity() = default;

    virtual std::size_t dim() const = 0;
    virtual std::string label() const = 0;
    virtual double log_density(std::span<const double> q) const = 0;
    virtual void grad_log_density(std::span<const double> q, std::span<double> grad) const = 0;

    /// pi({q : q[axis] <= threshold}) for side = below, complement for above.
    virtual std::optional<double> halfspace_mass(std::size_t axis, double threshold, Side side) const;

    /// Distribution of <normal, Q> for Q ~ pi, when it is a Gaussian mixture.
    virtual std::optional<ProjectedMixture> projection(std::span<const double> normal) const;

    /// Exact draw from pi.
    virtual void sample(RandomStream& rng, std::span<double> out) const = 0;

    virtual std::optional<HarmonicModel> harmonic_model() const { return std::nullopt; }

    /// True where grad_log_density returns a conventional subgradient.
    virtual bool nonsmooth_at(std::span<const double> /*q*/) const { return false; }

    /// [center - n * max_scale, center + n * max_scale] covering every mode along `axis`.
    virtual std::pair<double, double> span(std::size_t axis, double n_scales) const = 0;

    /// Mode locations, used by the Lyapunov function of the drift diagnostic.
    virtual std::vector<std::vector<double>> mode_centers() const = 0;

    /// Short human-readable parameter, e.g. sigma or a. NaN when the target has none.
    virtual double shape_parameter() const = 0;
};

/// N(0, 1) on R.
class Gaussian1D final : public TargetDensity {
public:
    std::size_t dim() const override { return 1; }
    std::string label() const override { return "gauss1d"; }
    double log_density(std::span<const double> q) const override;
    void grad_log_density(std::span<const double> q, std::span<double> grad) const override;
    std::optional<double> halfspace_mass(std::size_t axis, double threshold, Side side) const override;
    std::optional<ProjectedMixture> projection(std::span<const double> normal) const override;
    void sample(RandomStream& rng, std::span<double> out) const override;
    std::optional<HarmonicModel> harmonic_model() const override;
    std::pair<double, double> span(std::size_t axis, double n_scales) const override;
    std::vector<std::vector<double>> mode_centers() const override { return {{0.0}}; }
    double shape_parameter() const override;
};

/// 1/2 N(-1, sigma^2) + 1/2 N(1, sigma^2).
class GaussianMixture1D final : public TargetDensity {
public:
    explicit GaussianMixture1D(double sigma);

    double sigma() const { return sigma_; }
    std::size_t dim() const override { return 1; }
    std::string label() const override;
    double log_density(std::span<const double> q) const override;
    void grad_log_density(std::span<const double> q, std::span<double> grad) const override;
    std::optional<double> halfspace_mass(std::size_t axis, double threshold, Side side) const override;
    std::optional<ProjectedMixture> projection(std::span<const double> normal) const override;
    void sample(RandomStream& rng, std::span<double> out) const override;
    std::pair<double, double> span(std::size_t axis, double n_scales) const override;
    std::vector<std::vector<double>> mode_centers() const override { return {{-1.0}, {1.0}}; }
    double shape_parameter() const override { return sigma_; }

private:
    double sigma_;
};

/// Density proportional to max(phi(q - a), phi(q + a)), normalized by 2 F(a).
class MaxGaussian1D final : public TargetDensity {
public:
    explicit MaxGaussian1D(double a);

    double a() const { return a_; }
    std::size_t dim() const override { return 1; }
    std::string label() const override;
    double log_density(std::span<const double> q) const override;
    /// Gradient at the kink q = 0 is defined as 0.
    void grad_log_density(std::span<const double> q, std::span<double> grad) const override;
    std::optional<double> halfspace_mass(std::size_t axis, double threshold, Side side) const override;
    void sample(RandomStream& rng, std::span<double> out) const override;
    std::optional<HarmonicModel> harmonic_model() const override;
    bool nonsmooth_at(std::span<const double> q) const override { return a_ > 0.0 && q[0] == 0.0; }
    std::pair<double, double> span(std::size_t axis, double n_scales) const override;
    std::vector<std::vector<double>> mode_centers() const override { return {{-a_}, {a_}}; }
    double shape_parameter() const override { return a_; }

    double cdf(double q) const;
    double quantile(double u) const;

private:
    double a_;
    double log_norm_;  // log(2 F(a))
};

/// 1/2 N((-1,0,...,0), sigma^2 I) + 1/2 N((1,0,...,0), sigma^2 I) on R^d, d >= 2.
class IsotropicMixtureD final : public TargetDensity {
public:
    IsotropicMixtureD(std::size_t dim, double sigma);

    double sigma() const { return sigma_; }
    std::size_t dim() const override { return dim_; }
    std::string label() const override;
    double log_density(std::span<const double> q) const override;
    void grad_log_density(std::span<const double> q, std::span<double> grad) const override;
    std::optional<double> halfspace_mass(std::size_t axis, double threshold, Side side) const override;
    std::optional<ProjectedMixture> projection(std::span<const double> normal) const override;
    void sample(RandomStream& rng, std::span<double> out) const override;
    std::pair<double, double> span(std::size_t axis, double n_scales) const override;
    std::vector<std::vector<double>> mode_centers() const override;
    double shape_parameter() const override { return sigma_; }

private:
    std::size_t dim_;
    double sigma_;
};

/// N(0, diag(1, sigma^2)) on R^2.
class DegenerateGaussian2D final : public TargetDensity {
public:
    explicit DegenerateGaussian2D(double sigma);

    double sigma() const { return sigma_; }
    std::size_t dim() const override { return 2; }
    std::string label() const override;
    double log_density(std::span<const double> q) const override;
    void grad_log_density(std::span<const double> q, std::span<double> grad) const override;
    std::optional<double> halfspace_mass(std::size_t axis, double threshold, Side side) const override;
    std::optional<ProjectedMixture> projection(std::span<const double> normal) const override;
    void sample(RandomStream& rng, std::span<double> out) const override;
    std::optional<HarmonicModel> harmonic_model() const override;
    std::pair<double, double> span(std::size_t axis, double n_scales) const override;
    std::vector<std::vector<double>> mode_centers() const override { return {{0.0, 0.0}}; }
    double shape_parameter() const override { return sigma_; }

private:
    double sigma_;
};

/// exp(log_density(q)); underflows to 0 far in the tails.
double density(const TargetDensity& target, std::span<const double> q);
inline double density(const TargetDensity& target, double q) {
    return density(target, std::span<const double>(&q, 1));
}

/// pi((-inf, threshold]) for a one-dimensional target. Closed form when the target
/// provides one, adaptive quadrature (absolute tolerance 1e-10) otherwise.
double halfline_mass(const TargetDensity& target, double threshold);

/// The quadrature route of halfline_mass, exposed for cross-checks.
double halfline_mass_quadrature(const TargetDensity& target, double threshold, double abs_tol = 1e-10);

}  // namespace hmcgap
