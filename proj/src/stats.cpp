#include "hmcgap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hmcgap/parallel.hpp"

namespace hmcgap {

MeanEstimate mean_and_error(std::span<const double> x) {
    MeanEstimate e;
    e.n = x.size();
    if (x.empty()) return e;
    const double n = static_cast<double>(x.size());
    e.mean = pairwise_sum(x) / n;
    if (x.size() < 2) return e;
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - e.mean) * (x[i] - e.mean);
    e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    return e;
}

MeanEstimate proportion(std::size_t successes, std::size_t n) {
    MeanEstimate e;
    e.n = n;
    if (n == 0) return e;
    e.mean = static_cast<double>(successes) / static_cast<double>(n);
    e.std_error = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(n));
    return e;
}

double quantile(std::vector<double> x, double prob) {
    if (x.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile: prob outside [0,1]");
    std::sort(x.begin(), x.end());
    const double h = prob * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double kolmogorov_survival(double lambda) {
    // The alternating series converges slowly below ~0.2, where the survival is 1 to double precision.
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_test: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    KsResult r;
    r.n = sample.size();
    r.statistic = d;
    const double sn = std::sqrt(n);
    r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need two or more points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

}  // namespace hmcgap
