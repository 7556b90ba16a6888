#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace hmcgap {

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Sample mean and standard error, summed pairwise so the result depends only on the order of x.
MeanEstimate mean_and_error(std::span<const double> x);

/// Binomial proportion and its standard error sqrt(p (1 - p) / n).
MeanEstimate proportion(std::size_t successes, std::size_t n);

/// Linear-interpolation quantile (type 7) of unsorted data.
double quantile(std::vector<double> x, double prob);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, asymptotic p-value with
/// Stephens' small-sample correction.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least-squares slope and intercept of y on x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace hmcgap
