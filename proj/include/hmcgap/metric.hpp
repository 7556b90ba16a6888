#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmcgap {

/// Position-dependent symmetric positive-definite metric G(q).
class MetricField {
public:
    virtual ~MetricField() = default;

    virtual std::size_t dim() const = 0;
    virtual Eigen::MatrixXd G(std::span<const double> q) const = 0;
    virtual Eigen::MatrixXd G_inv(std::span<const double> q) const;
    virtual double log_det_G(std::span<const double> q) const;

    /// Partial derivatives dG/dq_i, i = 0..d-1, when known in closed form.
    virtual std::optional<std::vector<Eigen::MatrixXd>> dG(std::span<const double> /*q*/) const {
        return std::nullopt;
    }

    /// Lets the flow reduce to the isotropic Hamiltonian.
    virtual bool is_identity() const { return false; }
};

class IdentityMetric final : public MetricField {
public:
    explicit IdentityMetric(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    Eigen::MatrixXd G(std::span<const double>) const override;
    Eigen::MatrixXd G_inv(std::span<const double>) const override;
    double log_det_G(std::span<const double>) const override { return 0.0; }
    std::optional<std::vector<Eigen::MatrixXd>> dG(std::span<const double>) const override;
    bool is_identity() const override { return true; }

private:
    std::size_t dim_;
};

/// Constant metric G(q) = M.
class ConstantMetric final : public MetricField {
public:
    explicit ConstantMetric(Eigen::MatrixXd m);
    std::size_t dim() const override { return static_cast<std::size_t>(m_.rows()); }
    Eigen::MatrixXd G(std::span<const double>) const override { return m_; }
    Eigen::MatrixXd G_inv(std::span<const double>) const override { return inv_; }
    double log_det_G(std::span<const double>) const override { return log_det_; }
    std::optional<std::vector<Eigen::MatrixXd>> dG(std::span<const double>) const override;

private:
    Eigen::MatrixXd m_;
    Eigen::MatrixXd inv_;
    double log_det_;
};

/// Metric given by a callable, with optional closed-form derivatives.
class FunctionMetric final : public MetricField {
public:
    using MatrixFn = std::function<Eigen::MatrixXd(std::span<const double>)>;
    using DerivFn = std::function<std::vector<Eigen::MatrixXd>(std::span<const double>)>;

    FunctionMetric(std::size_t dim, MatrixFn g, DerivFn dg = {});
    std::size_t dim() const override { return dim_; }
    Eigen::MatrixXd G(std::span<const double> q) const override { return g_(q); }
    std::optional<std::vector<Eigen::MatrixXd>> dG(std::span<const double> q) const override;

private:
    std::size_t dim_;
    MatrixFn g_;
    DerivFn dg_;
};

/// dG/dq_i by central differences with step h; used when the metric has no closed form.
std::vector<Eigen::MatrixXd> metric_derivatives_fd(const MetricField& metric, std::span<const double> q,
                                                   double h = 1e-6);

/// Closed form when the metric provides one, central differences otherwise.
std::vector<Eigen::MatrixXd> metric_derivatives(const MetricField& metric, std::span<const double> q);

/// Thrown when G(q) is not symmetric positive definite at some sampled point.
class MetricError : public std::runtime_error {
public:
    MetricError(const std::string& what, std::vector<double> point)
        : std::runtime_error(what), point_(std::move(point)) {}
    const std::vector<double>& point() const { return point_; }

private:
    std::vector<double> point_;
};

struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct MetricBounds {
    double lambda_min = 0.0;
    double lambda_max = std::numeric_limits<double>::infinity();
};

struct MetricValidation {
    double lambda_min_observed = 0.0;
    double lambda_max_observed = 0.0;
    double max_inverse_residual = 0.0;  // max ||G G_inv - I||_max over samples
    std::size_t samples = 0;
    bool passed = false;
};

/// Samples `n_samples` points uniformly in `box` (deterministic for a given seed) and
/// checks the singular values of G against `bounds` and G * G_inv against identity.
/// Throws MetricError naming the first point where G is not SPD.
MetricValidation validate_metric(const MetricField& metric, const Box& box, std::size_t n_samples,
                                 const MetricBounds& bounds = {}, std::uint64_t seed = 0);

}  // namespace hmcgap
