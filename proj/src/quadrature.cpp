#include "hmcgap/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hmcgap {

namespace {

// Golub-Welsch for a symmetric Jacobi matrix with zero diagonal.
QuadratureRule golub_welsch(const Eigen::VectorXd& off_diagonal, double mu0) {
    const Eigen::Index n = off_diagonal.size() + 1;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, off_diagonal, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw std::runtime_error("golub_welsch: eigensolver failed");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        rule.nodes[k] = solver.eigenvalues()[k];
        const double v0 = solver.eigenvectors()(0, k);
        rule.weights[k] = mu0 * v0 * v0;
    }
    // Nodes are symmetric about zero; enforce it exactly.
    for (Eigen::Index k = 0; k < n / 2; ++k) {
        const Eigen::Index j = n - 1 - k;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[k]);
        const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[j] = x;
        rule.weights[k] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

}  // namespace

QuadratureRule gauss_hermite_normal(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite_normal: n must be positive");
    if (n == 1) return {{0.0}, {1.0}};
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
    auto rule = golub_welsch(off, 1.0);
    const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    for (double& w : rule.weights) w /= total;
    return rule;
}

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    if (n == 1) return {{0.0}, {2.0}};
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return golub_welsch(off, 2.0);
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Gk15 {
    double kronrod;
    double gauss;
};

Gk15 gk15(const std::function<double(double)>& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double rk = fc * kWgk[7];
    double rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(center - dx) + f(center + dx);
        rk += kWgk[j] * fsum;
        if (j % 2 == 1) rg += kWg[j / 2] * fsum;
    }
    return {rk * half, rg * half};
}

void adapt(const std::function<double(double)>& f, double lo, double hi, double tol, int depth,
           AdaptiveResult& out) {
    const Gk15 r = gk15(f, lo, hi);
    const double err = std::abs(r.kronrod - r.gauss);
    if (err <= tol || depth <= 0) {
        out.value += r.kronrod;
        out.error_estimate += err;
        ++out.intervals;
        return;
    }
    const double mid = 0.5 * (lo + hi);
    adapt(f, lo, mid, 0.5 * tol, depth - 1, out);
    adapt(f, mid, hi, 0.5 * tol, depth - 1, out);
}

}  // namespace

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                  double abs_tol, int max_depth) {
    if (!(hi >= lo)) throw std::invalid_argument("integrate_adaptive: hi < lo");
    AdaptiveResult out;
    if (hi == lo) return out;
    adapt(f, lo, hi, abs_tol, max_depth, out);
    return out;
}

}  // namespace hmcgap
