#pragma once

#include <functional>
#include <span>

namespace loewnerlab {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_q(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// Q((sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) D), n_e = n m / (n + m).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// One-sample test against a continuous CDF, same p-value approximation.
KsResult ks_one_sample(std::span<const double> a, const std::function<double(double)>& cdf);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased
};

Moments moments(std::span<const double> a);

}  // namespace loewnerlab
