#pragma once

#include <cmath>
#include <numbers>
#include <span>

namespace hmcgap {

inline constexpr double kSqrt2Pi = 2.506628274631000502415765284811;
inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

/// Standard normal density.
inline double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_pdf(double x, double mean, double sd) {
    return std_normal_pdf((x - mean) / sd) / sd;
}

inline double std_normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

/// Standard normal CDF through the complementary error function.
///
/// glibc documents erfc to within a few ulp over the whole real line, which keeps
/// the absolute error of this routine below 1e-16 and the relative error in the
/// lower tail at the same order (erfc does not cancel there).
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

inline double normal_cdf(double x, double mean, double sd) { return std_normal_cdf((x - mean) / sd); }

/// Inverse of std_normal_cdf on (0,1). Acklam's rational approximation refined by
/// one Halley step against erfc; relative error ~1e-15 across the open interval.
double std_normal_quantile(double u);

/// log(exp(a) + exp(b)) without overflow or underflow.
inline double log_add_exp(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -INFINITY) return a;
    return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(std::span<const double> values);

}  // namespace hmcgap
