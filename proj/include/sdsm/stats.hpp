#ifndef SDSM_STATS_HPP
#define SDSM_STATS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace sdsm::stats {

/// Pairwise (cascade) summation in index order; deterministic.
double pairwise_sum(std::span<const double> x);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean with standard error s / sqrt(n).
Estimate mean(std::span<const double> x);
/// Unbiased sample variance with the SE sqrt((m4 - s^4) / n).
Estimate variance(std::span<const double> x);
/// Sample covariance, SE from the sample variance of the centered products.
Estimate covariance(std::span<const double> x, std::span<const double> y);

/// (a - b) / sqrt(se_a^2 + se_b^2); with only one SE pass 0 for the other.
double z_score(double a, double se_a, double b, double se_b = 0.0);

/// Least-squares slope of y on x.
double slope(std::span<const double> x, std::span<const double> y);

/// One-sample Kolmogorov-Smirnov statistic D against Exponential(rate).
double ks_exponential(std::vector<double> sample, double rate);
/// sqrt(n) D threshold at the two-sided 3-sigma level (alpha = 0.0027),
/// from the Kolmogorov limiting distribution.
double ks_threshold_3sigma();
/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

}  // namespace sdsm::stats

#endif  // SDSM_STATS_HPP
