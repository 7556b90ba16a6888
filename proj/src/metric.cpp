#include "hmcgap/metric.hpp"

#include <cmath>
#include <sstream>

#include "hmcgap/rng.hpp"

namespace hmcgap {

namespace {

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& g, std::span<const double> q) {
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
        throw MetricError("metric is not positive definite", std::vector<double>(q.begin(), q.end()));
    }
    return llt;
}

std::string point_string(std::span<const double> q) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < q.size(); ++i) os << (i ? ", " : "") << q[i];
    os << ")";
    return os.str();
}

}  // namespace

Eigen::MatrixXd MetricField::G_inv(std::span<const double> q) const {
    const Eigen::MatrixXd g = G(q);
    auto llt = checked_llt(g, q);
    return llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
}

double MetricField::log_det_G(std::span<const double> q) const {
    auto llt = checked_llt(G(q), q);
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

Eigen::MatrixXd IdentityMetric::G(std::span<const double>) const {
    const auto n = static_cast<Eigen::Index>(dim_);
    return Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd IdentityMetric::G_inv(std::span<const double> q) const { return G(q); }

std::optional<std::vector<Eigen::MatrixXd>> IdentityMetric::dG(std::span<const double>) const {
    const auto n = static_cast<Eigen::Index>(dim_);
    return std::vector<Eigen::MatrixXd>(dim_, Eigen::MatrixXd::Zero(n, n));
}

ConstantMetric::ConstantMetric(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("ConstantMetric: matrix must be square");
    Eigen::LLT<Eigen::MatrixXd> llt(m_);
    if (llt.info() != Eigen::Success) throw MetricError("metric is not positive definite", {});
    inv_ = llt.solve(Eigen::MatrixXd::Identity(m_.rows(), m_.cols()));
    log_det_ = 0.0;
    for (Eigen::Index i = 0; i < m_.rows(); ++i) log_det_ += 2.0 * std::log(llt.matrixLLT()(i, i));
}

std::optional<std::vector<Eigen::MatrixXd>> ConstantMetric::dG(std::span<const double>) const {
    return std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(m_.rows()),
                                        Eigen::MatrixXd::Zero(m_.rows(), m_.cols()));
}

FunctionMetric::FunctionMetric(std::size_t dim, MatrixFn g, DerivFn dg)
    : dim_(dim), g_(std::move(g)), dg_(std::move(dg)) {
    if (!g_) throw std::invalid_argument("FunctionMetric: empty metric function");
}

std::optional<std::vector<Eigen::MatrixXd>> FunctionMetric::dG(std::span<const double> q) const {
    if (!dg_) return std::nullopt;
    return dg_(q);
}

std::vector<Eigen::MatrixXd> metric_derivatives_fd(const MetricField& metric, std::span<const double> q,
                                                   double h) {
    const std::size_t d = metric.dim();
    std::vector<double> x(q.begin(), q.end());
    std::vector<Eigen::MatrixXd> out;
    out.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        Eigen::MatrixXd plus = metric.G(x);
        x[i] = xi - h;
        Eigen::MatrixXd minus = metric.G(x);
        x[i] = xi;
        out.push_back((plus - minus) / (2.0 * h));
    }
    return out;
}

std::vector<Eigen::MatrixXd> metric_derivatives(const MetricField& metric, std::span<const double> q) {
    if (auto exact = metric.dG(q)) return std::move(*exact);
    return metric_derivatives_fd(metric, q);
}

MetricValidation validate_metric(const MetricField& metric, const Box& box, std::size_t n_samples,
                                 const MetricBounds& bounds, std::uint64_t seed) {
    const std::size_t d = metric.dim();
    if (box.lo.size() != d || box.hi.size() != d) throw std::invalid_argument("validate_metric: box dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) {
        if (!(box.lo[i] <= box.hi[i])) throw std::invalid_argument("validate_metric: empty box");
    }
    if (n_samples == 0) throw std::invalid_argument("validate_metric: n_samples must be >= 1");

    MetricValidation report;
    report.lambda_min_observed = std::numeric_limits<double>::infinity();
    report.lambda_max_observed = 0.0;
    std::vector<double> q(d);
    for (std::size_t k = 0; k < n_samples; ++k) {
        RandomStream rng(seed, 0, k);
        for (std::size_t i = 0; i < d; ++i) q[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.uniform();
        // The first sample is the box centre.
        if (k == 0) {
            for (std::size_t i = 0; i < d; ++i) q[i] = 0.5 * (box.lo[i] + box.hi[i]);
        }
        const Eigen::MatrixXd g = metric.G(q);
        if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + g.cwiseAbs().maxCoeff())) {
            throw MetricError("metric is not symmetric at " + point_string(q), q);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0)) throw MetricError("metric is not positive definite at " + point_string(q), q);
        report.lambda_min_observed = std::min(report.lambda_min_observed, lo);
        report.lambda_max_observed = std::max(report.lambda_max_observed, hi);
        const Eigen::MatrixXd resid =
            g * metric.G_inv(q) - Eigen::MatrixXd::Identity(g.rows(), g.cols());
        report.max_inverse_residual = std::max(report.max_inverse_residual, resid.cwiseAbs().maxCoeff());
    }
    report.samples = n_samples;
    report.passed = report.lambda_min_observed >= bounds.lambda_min &&
                    report.lambda_max_observed <= bounds.lambda_max && report.max_inverse_residual <= 1e-10;
    return report;
}

}  // namespace hmcgap
