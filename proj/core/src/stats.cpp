#include "mflab/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "mflab/errors.hpp"

namespace mflab {
namespace {

using RoundUp = boost::math::policies::policy<
    boost::math::policies::discrete_quantile<boost::math::policies::integer_round_up>>;

constexpr std::uint64_t kDirectBinomialLimit = 64;

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

std::uint64_t poisson_quantile(double mean, double p) {
  if (!(mean > 0.0)) return 0;
  p = clamp_probability(p);
  if (p <= 0.0) return 0;
  boost::math::poisson_distribution<double, RoundUp> dist(mean);
  return static_cast<std::uint64_t>(boost::math::quantile(dist, p));
}

std::uint64_t poisson_quantile_upper(double mean, double q) {
  if (!(mean > 0.0)) return 0;
  q = clamp_probability(q);
  if (q >= 1.0) return 0;
  boost::math::poisson_distribution<double, RoundUp> dist(mean);
  return static_cast<std::uint64_t>(boost::math::quantile(boost::math::complement(dist, q)));
}

std::uint64_t binomial_half_quantile(std::uint64_t n, double p) {
  p = clamp_probability(p);
  if (n == 0 || p <= 0.0) return 0;
  if (n <= kDirectBinomialLimit) {
    double pmf = std::ldexp(1.0, -static_cast<int>(n));
    double cdf = pmf;
    std::uint64_t k = 0;
    while (cdf < p && k < n) {
      pmf *= static_cast<double>(n - k) / static_cast<double>(k + 1);
      ++k;
      cdf += pmf;
    }
    return k;
  }
  boost::math::binomial_distribution<double, RoundUp> dist(static_cast<double>(n), 0.5);
  return static_cast<std::uint64_t>(boost::math::quantile(dist, p));
}

std::uint64_t binomial_half_quantile_upper(std::uint64_t n, double q) {
  return n - binomial_half_quantile(n, q);
}

double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanEstimate mean_and_std_error(std::span<const double> samples) {
  MeanEstimate out;
  out.count = samples.size();
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size());
  out.mean = pairwise_sum(samples) / n;
  if (samples.size() < 2) return out;
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = samples[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / (n - 1.0);
  out.std_error = std::sqrt(var / n);
  return out;
}

SlopeFit fit_log_log(std::span<const double> x, std::span<const double> y, std::span<const double> y_std_error) {
  if (x.size() != y.size() || (!y_std_error.empty() && y_std_error.size() != y.size()))
    throw InvalidArgument("fit_log_log: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InvalidArgument("fit_log_log: need at least two points");
  std::vector<double> lx(n), ly(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || y[i] == 0.0 || !std::isfinite(y[i]))
      throw InvalidArgument("fit_log_log: x must be positive and y nonzero");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(std::abs(y[i]));
    if (!y_std_error.empty()) {
      const double rel = y_std_error[i] / std::abs(y[i]);
      if (!(rel > 0.0)) throw InvalidArgument("fit_log_log: standard errors must be positive");
      w[i] = 1.0 / (rel * rel);
    }
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * lx[i];
    sy += w[i] * ly[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (lx[i] - mx) * (lx[i] - mx);
    sxy += w[i] * (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit_log_log: x values must not all coincide");

  SlopeFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double half_width;
  if (!y_std_error.empty()) {
    fit.slope_std_error = std::sqrt(1.0 / sxx);
    half_width = 1.959963984540054 * fit.slope_std_error;
  } else if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - fit.intercept - fit.slope * lx[i];
      rss += r * r;
    }
    const double dof = static_cast<double>(n - 2);
    fit.slope_std_error = std::sqrt(rss / dof / sxx);
    boost::math::students_t t(dof);
    half_width = boost::math::quantile(boost::math::complement(t, 0.025)) * fit.slope_std_error;
  } else {
    fit.slope_std_error = std::numeric_limits<double>::infinity();
    half_width = std::numeric_limits<double>::infinity();
  }
  fit.ci_low = fit.slope - half_width;
  fit.ci_high = fit.slope + half_width;
  return fit;
}

}  // namespace mflab
