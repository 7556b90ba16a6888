#include "hmcgap/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hmcgap/normal.hpp"
#include "hmcgap/quadrature.hpp"

namespace hmcgap {

namespace {

void require_finite(std::span<const double> q, const char* where) {
    for (double v : q) {
        if (!std::isfinite(v)) throw DomainError(std::string(where) + ": non-finite coordinate");
    }
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive and finite");
}

double side_mass(double below, Side side) { return side == Side::below ? below : 1.0 - below; }

std::string format_param(const char* kind, const char* name, double v) {
    std::ostringstream os;
    os << kind << "(" << name << "=" << v << ")";
    return os.str();
}

double norm_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

double ProjectedMixture::cdf(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * normal_cdf(x, means[k], sds[k]);
    return s;
}

double ProjectedMixture::pdf(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * normal_pdf(x, means[k], sds[k]);
    return s;
}

std::optional<double> TargetDensity::halfspace_mass(std::size_t, double, Side) const { return std::nullopt; }

std::optional<ProjectedMixture> TargetDensity::projection(std::span<const double>) const {
    return std::nullopt;
}

// ---------------------------------------------------------------- Gaussian1D

double Gaussian1D::log_density(std::span<const double> q) const { return std_normal_log_pdf(q[0]); }

void Gaussian1D::grad_log_density(std::span<const double> q, std::span<double> grad) const { grad[0] = -q[0]; }

std::optional<double> Gaussian1D::halfspace_mass(std::size_t axis, double threshold, Side side) const {
    if (axis != 0) return std::nullopt;
    return side_mass(std_normal_cdf(threshold), side);
}

std::optional<ProjectedMixture> Gaussian1D::projection(std::span<const double> normal) const {
    return ProjectedMixture{{1.0}, {0.0}, {std::abs(normal[0])}};
}

void Gaussian1D::sample(RandomStream& rng, std::span<double> out) const { out[0] = rng.normal(); }

std::optional<HarmonicModel> Gaussian1D::harmonic_model() const { return HarmonicModel{{{0.0}, {1.0}}, {}}; }

std::pair<double, double> Gaussian1D::span(std::size_t, double n_scales) const { return {-n_scales, n_scales}; }

double Gaussian1D::shape_parameter() const { return std::numeric_limits<double>::quiet_NaN(); }

// --------------------------------------------------------- GaussianMixture1D

GaussianMixture1D::GaussianMixture1D(double sigma) : sigma_(sigma) { require_positive(sigma, "sigma"); }

std::string GaussianMixture1D::label() const { return format_param("mixture1d", "sigma", sigma_); }

double GaussianMixture1D::log_density(std::span<const double> q) const {
    const double zl = (q[0] + 1.0) / sigma_;
    const double zr = (q[0] - 1.0) / sigma_;
    return log_add_exp(-0.5 * zl * zl, -0.5 * zr * zr) - std::log(2.0 * sigma_) - kLogSqrt2Pi;
}

void GaussianMixture1D::grad_log_density(std::span<const double> q, std::span<double> grad) const {
    // Responsibility-weighted mean of component scores, in log space.
    const double zl = (q[0] + 1.0) / sigma_;
    const double zr = (q[0] - 1.0) / sigma_;
    const double ll = -0.5 * zl * zl;
    const double lr = -0.5 * zr * zr;
    const double m = std::max(ll, lr);
    const double wl = std::exp(ll - m);
    const double wr = std::exp(lr - m);
    const double s2 = sigma_ * sigma_;
    grad[0] = (wl * (-(q[0] + 1.0)) + wr * (-(q[0] - 1.0))) / ((wl + wr) * s2);
}

std::optional<double> GaussianMixture1D::halfspace_mass(std::size_t axis, double threshold, Side side) const {
    if (axis != 0) return std::nullopt;
    const double below = 0.5 * normal_cdf(threshold, -1.0, sigma_) + 0.5 * normal_cdf(threshold, 1.0, sigma_);
    return side_mass(below, side);
}

std::optional<ProjectedMixture> GaussianMixture1D::projection(std::span<const double> normal) const {
    const double n = normal[0];
    return ProjectedMixture{{0.5, 0.5}, {-n, n}, {std::abs(n) * sigma_, std::abs(n) * sigma_}};
}

void GaussianMixture1D::sample(RandomStream& rng, std::span<double> out) const {
    const double center = rng.uniform() < 0.5 ? -1.0 : 1.0;
    out[0] = center + sigma_ * rng.normal();
}

std::pair<double, double> GaussianMixture1D::span(std::size_t, double n_scales) const {
    return {-1.0 - n_scales * sigma_, 1.0 + n_scales * sigma_};
}

// ------------------------------------------------------------- MaxGaussian1D

MaxGaussian1D::MaxGaussian1D(double a) : a_(a) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("a must be nonnegative and finite");
    log_norm_ = std::log(2.0 * std_normal_cdf(a));
}

std::string MaxGaussian1D::label() const { return format_param("maxgauss1d", "a", a_); }

double MaxGaussian1D::log_density(std::span<const double> q) const {
    // max(phi(q - a), phi(q + a)) = phi(|q| - a) for a >= 0.
    return std_normal_log_pdf(std::abs(q[0]) - a_) - log_norm_;
}

void MaxGaussian1D::grad_log_density(std::span<const double> q, std::span<double> grad) const {
    const double x = q[0];
    if (x > 0.0)
        grad[0] = -(x - a_);
    else if (x < 0.0)
        grad[0] = -(x + a_);
    else
        grad[0] = 0.0;
}

double MaxGaussian1D::cdf(double q) const {
    const double two_f = 2.0 * std_normal_cdf(a_);
    if (q <= 0.0) return std_normal_cdf(q + a_) / two_f;
    return 1.0 - std_normal_cdf(-q + a_) / two_f;
}

double MaxGaussian1D::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("MaxGaussian1D::quantile: u outside (0,1)");
    const double two_f = 2.0 * std_normal_cdf(a_);
    if (u <= 0.5) return std_normal_quantile(u * two_f) - a_;
    return a_ - std_normal_quantile((1.0 - u) * two_f);
}

std::optional<double> MaxGaussian1D::halfspace_mass(std::size_t axis, double threshold, Side side) const {
    if (axis != 0) return std::nullopt;
    return side_mass(cdf(threshold), side);
}

void MaxGaussian1D::sample(RandomStream& rng, std::span<double> out) const { out[0] = quantile(rng.uniform()); }

std::optional<HarmonicModel> MaxGaussian1D::harmonic_model() const {
    if (a_ == 0.0) return HarmonicModel{{{0.0}, {1.0}}, {}};
    return HarmonicModel{{{-a_}, {1.0}}, HarmonicPiece{{a_}, {1.0}}};
}

std::pair<double, double> MaxGaussian1D::span(std::size_t, double n_scales) const {
    return {-a_ - n_scales, a_ + n_scales};
}

// --------------------------------------------------------- IsotropicMixtureD

IsotropicMixtureD::IsotropicMixtureD(std::size_t dim, double sigma) : dim_(dim), sigma_(sigma) {
    if (dim < 2) throw DomainError("IsotropicMixtureD requires dim >= 2");
    require_positive(sigma, "sigma");
}

std::string IsotropicMixtureD::label() const {
    std::ostringstream os;
    os << "mixtureNd(dim=" << dim_ << ",sigma=" << sigma_ << ")";
    return os.str();
}

double IsotropicMixtureD::log_density(std::span<const double> q) const {
    double rest = 0.0;
    for (std::size_t i = 1; i < dim_; ++i) rest += q[i] * q[i];
    const double s2 = sigma_ * sigma_;
    const double ll = -0.5 * ((q[0] + 1.0) * (q[0] + 1.0) + rest) / s2;
    const double lr = -0.5 * ((q[0] - 1.0) * (q[0] - 1.0) + rest) / s2;
    return log_add_exp(ll, lr) - std::log(2.0) - static_cast<double>(dim_) * (std::log(sigma_) + kLogSqrt2Pi);
}

void IsotropicMixtureD::grad_log_density(std::span<const double> q, std::span<double> grad) const {
    const double s2 = sigma_ * sigma_;
    const double ll = -0.5 * (q[0] + 1.0) * (q[0] + 1.0) / s2;
    const double lr = -0.5 * (q[0] - 1.0) * (q[0] - 1.0) / s2;
    const double m = std::max(ll, lr);
    const double wl = std::exp(ll - m);
    const double wr = std::exp(lr - m);
    grad[0] = (wl * (-(q[0] + 1.0)) + wr * (-(q[0] - 1.0))) / ((wl + wr) * s2);
    for (std::size_t i = 1; i < dim_; ++i) grad[i] = -q[i] / s2;
}

std::optional<double> IsotropicMixtureD::halfspace_mass(std::size_t axis, double threshold, Side side) const {
    if (axis >= dim_) return std::nullopt;
    if (axis == 0) {
        return side_mass(0.5 * normal_cdf(threshold, -1.0, sigma_) + 0.5 * normal_cdf(threshold, 1.0, sigma_),
                         side);
    }
    return side_mass(normal_cdf(threshold, 0.0, sigma_), side);
}

std::optional<ProjectedMixture> IsotropicMixtureD::projection(std::span<const double> normal) const {
    const double sd = norm_of(normal.first(dim_)) * sigma_;
    return ProjectedMixture{{0.5, 0.5}, {-normal[0], normal[0]}, {sd, sd}};
}

void IsotropicMixtureD::sample(RandomStream& rng, std::span<double> out) const {
    const double center = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < dim_; ++i) out[i] = sigma_ * rng.normal();
    out[0] += center;
}

std::pair<double, double> IsotropicMixtureD::span(std::size_t axis, double n_scales) const {
    if (axis == 0) return {-1.0 - n_scales * sigma_, 1.0 + n_scales * sigma_};
    return {-n_scales * sigma_, n_scales * sigma_};
}

std::vector<std::vector<double>> IsotropicMixtureD::mode_centers() const {
    std::vector<double> left(dim_, 0.0), right(dim_, 0.0);
    left[0] = -1.0;
    right[0] = 1.0;
    return {left, right};
}

// ------------------------------------------------------ DegenerateGaussian2D

DegenerateGaussian2D::DegenerateGaussian2D(double sigma) : sigma_(sigma) { require_positive(sigma, "sigma"); }

std::string DegenerateGaussian2D::label() const { return format_param("degenerate2d", "sigma", sigma_); }

double DegenerateGaussian2D::log_density(std::span<const double> q) const {
    const double z = q[1] / sigma_;
    return -0.5 * (q[0] * q[0] + z * z) - 2.0 * kLogSqrt2Pi - std::log(sigma_);
}

void DegenerateGaussian2D::grad_log_density(std::span<const double> q, std::span<double> grad) const {
    grad[0] = -q[0];
    grad[1] = -q[1] / (sigma_ * sigma_);
}

std::optional<double> DegenerateGaussian2D::halfspace_mass(std::size_t axis, double threshold, Side side) const {
    if (axis == 0) return side_mass(std_normal_cdf(threshold), side);
    if (axis == 1) return side_mass(normal_cdf(threshold, 0.0, sigma_), side);
    return std::nullopt;
}

std::optional<ProjectedMixture> DegenerateGaussian2D::projection(std::span<const double> normal) const {
    const double var = normal[0] * normal[0] + normal[1] * normal[1] * sigma_ * sigma_;
    return ProjectedMixture{{1.0}, {0.0}, {std::sqrt(var)}};
}

void DegenerateGaussian2D::sample(RandomStream& rng, std::span<double> out) const {
    out[0] = rng.normal();
    out[1] = sigma_ * rng.normal();
}

std::optional<HarmonicModel> DegenerateGaussian2D::harmonic_model() const {
    return HarmonicModel{{{0.0, 0.0}, {1.0, 1.0 / sigma_}}, {}};
}

std::pair<double, double> DegenerateGaussian2D::span(std::size_t axis, double n_scales) const {
    const double s = axis == 0 ? 1.0 : sigma_;
    return {-n_scales * s, n_scales * s};
}

// ---------------------------------------------------------------- operations

double density(const TargetDensity& target, std::span<const double> q) {
    require_finite(q, "density");
    return std::exp(target.log_density(q));
}

double halfline_mass_quadrature(const TargetDensity& target, double threshold, double abs_tol) {
    if (target.dim() != 1) throw DomainError("halfline_mass: target must be one-dimensional");
    const auto [lo, hi] = target.span(0, 10.0);
    if (threshold <= lo) return 0.0;
    const double upper = std::min(threshold, hi);
    auto f = [&](double x) { return std::exp(target.log_density(std::span<const double>(&x, 1))); };
    // The kink of piecewise targets sits at 0; split there so the rule sees smooth pieces.
    double total = 0.0;
    if (lo < 0.0 && upper > 0.0) {
        total = integrate_adaptive(f, lo, 0.0, 0.5 * abs_tol).value +
                integrate_adaptive(f, 0.0, upper, 0.5 * abs_tol).value;
    } else {
        total = integrate_adaptive(f, lo, upper, abs_tol).value;
    }
    return std::clamp(total, 0.0, 1.0);
}

double halfline_mass(const TargetDensity& target, double threshold) {
    if (target.dim() != 1) throw DomainError("halfline_mass: target must be one-dimensional");
    if (std::isnan(threshold)) throw DomainError("halfline_mass: threshold is NaN");
    if (threshold == -std::numeric_limits<double>::infinity()) return 0.0;
    if (threshold == std::numeric_limits<double>::infinity()) return 1.0;
    if (auto m = target.halfspace_mass(0, threshold, Side::below)) return *m;
    return halfline_mass_quadrature(target, threshold);
}

}  // namespace hmcgap
