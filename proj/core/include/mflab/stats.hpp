#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mflab {

// Generalized inverse CDF: smallest k with P(X <= k) >= p.
std::uint64_t poisson_quantile(double mean, double p);
// Same quantile given the upper-tail probability q = 1 - p; exact for tiny q.
std::uint64_t poisson_quantile_upper(double mean, double q);
std::uint64_t binomial_half_quantile(std::uint64_t n, double p);
// n - Q(q): the quantile function of Bin(n, 1/2) read from the upper tail.
std::uint64_t binomial_half_quantile_upper(std::uint64_t n, double q);

// Summation along a fixed binary tree over the index range. The result only
// depends on the values and their order, never on how work was scheduled.
double pairwise_sum(std::span<const double> values);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

MeanEstimate mean_and_std_error(std::span<const double> samples);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;
};

// Least-squares fit of log|y| = a + slope * log x. With y_std_error the fit
// is weighted by the delta-method variance of log|y| and the interval uses
// the known-variance normal quantile; without it, ordinary least squares and
// a Student-t interval on the residual variance.
SlopeFit fit_log_log(std::span<const double> x, std::span<const double> y,
                     std::span<const double> y_std_error = {});

}  // namespace mflab
