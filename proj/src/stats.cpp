#include "sdsm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdsm::stats {

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

Estimate mean(std::span<const double> x) {
  Estimate e;
  e.n = x.size();
  if (e.n == 0) return e;
  e.value = pairwise_sum(x) / e.n;
  if (e.n > 1) {
    std::vector<double> sq(e.n);
    for (std::size_t i = 0; i < e.n; ++i) sq[i] = (x[i] - e.value) * (x[i] - e.value);
    e.se = std::sqrt(pairwise_sum(sq) / (e.n - 1) / e.n);
  }
  return e;
}

Estimate variance(std::span<const double> x) {
  Estimate e;
  e.n = x.size();
  if (e.n < 2) return e;
  double m = pairwise_sum(x) / e.n;
  std::vector<double> d2(e.n), d4(e.n);
  for (std::size_t i = 0; i < e.n; ++i) {
    double d = x[i] - m;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  double m2 = pairwise_sum(d2) / e.n;
  double m4 = pairwise_sum(d4) / e.n;
  e.value = m2 * e.n / (e.n - 1);
  e.se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / e.n);
  return e;
}

Estimate covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("covariance: length mismatch");
  Estimate e;
  e.n = x.size();
  if (e.n < 2) return e;
  double mx = pairwise_sum(x) / e.n, my = pairwise_sum(y) / e.n;
  std::vector<double> prod(e.n);
  for (std::size_t i = 0; i < e.n; ++i) prod[i] = (x[i] - mx) * (y[i] - my);
  Estimate pm = mean(prod);
  e.value = pm.value * e.n / (e.n - 1);
  e.se = pm.se;
  return e;
}

double z_score(double a, double se_a, double b, double se_b) {
  double s = std::sqrt(se_a * se_a + se_b * se_b);
  if (s == 0.0) return a == b ? 0.0 : std::copysign(INFINITY, a - b);
  return (a - b) / s;
}

double slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope: need two points");
  double n = x.size(), mx = 0, my = 0;
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
  return sxy / sxx;
}

double ks_exponential(std::vector<double> sample, double rate) {
  std::sort(sample.begin(), sample.end());
  const double n = sample.size();
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double F = 1.0 - std::exp(-rate * sample[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k < 200; ++k) {
    double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

double ks_threshold_3sigma() {
  // Solve P(K > x) = 0.0027 by bisection.
  const double alpha = std::erfc(3.0 / std::sqrt(2.0));
  double lo = 1.0, hi = 3.0;
  for (int i = 0; i < 100; ++i) {
    double mid = 0.5 * (lo + hi);
    if (kolmogorov_survival(mid) > alpha) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace sdsm::stats
