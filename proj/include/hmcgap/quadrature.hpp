#pragma once

#include <functional>
#include <vector>

namespace hmcgap {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for the standard normal weight: sum_k w_k f(x_k) ~ E[f(Z)],
/// Z ~ N(0,1). Weights sum to one. Built by Golub-Welsch.
QuadratureRule gauss_hermite_normal(int n);

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

struct AdaptiveResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int intervals = 0;
};

/// Adaptive Gauss-Kronrod (7/15) on [lo, hi] to absolute tolerance `abs_tol`.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                  double abs_tol = 1e-10, int max_depth = 40);

}  // namespace hmcgap
