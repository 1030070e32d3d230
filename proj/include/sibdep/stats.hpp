#ifndef SIBDEP_STATS_HPP
#define SIBDEP_STATS_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace sibdep {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  ///< sample standard deviation / sqrt(count)
};

/// Mean and standard error. Identical samples give a standard error of
/// exactly zero and the sample value itself as the mean.
Estimate mean_stderr(std::span<const double> xs);

/// log(sum exp(x)) with the maximum shifted out.
double log_sum_exp(std::span<const double> xs);
/// log(mean exp(x)).
double log_mean_exp(std::span<const double> xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> xs);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Total variation 0.5 * sum |p_k - q_k| of two mass functions on 0, 1, ...;
/// the shorter one is padded with zeros.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace sibdep

#endif  // SIBDEP_STATS_HPP
