#pragma once

#include <span>
#include <vector>

namespace propspec::stats {

double mean(std::span<const double> x);

/// Sample standard deviation (n - 1 denominator); 0 for n < 2.
double sample_stddev(std::span<const double> x);

/// Standard normal cumulative distribution function.
double normal_cdf(double z);

/// One-sample Kolmogorov-Smirnov statistic D = sup |F_n - Phi| of the
/// values against the standard normal. The values are not standardized.
double ks_statistic_normal(std::span<const double> values);

/// Quantile with linear interpolation between order statistics at
/// position (n - 1) * q (the default rule of most numeric packages).
double quantile_linear(std::span<const double> values, double q);

/// 1-based ranks with ties receiving their average rank.
std::vector<double> average_ranks(std::span<const double> values);

} // namespace propspec::stats
