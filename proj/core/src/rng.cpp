#include "mflab/rng.hpp"

#include "mflab/stats.hpp"

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>

namespace mflab {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d, std::uint64_t e) {
  std::uint64_t state = 0x6a09e667f3bcc909ULL;
  std::uint64_t h = 0;
  for (std::uint64_t v : {a, b, c, d, e}) {
    state ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(state);
  }
  return h;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

Rng::Rng(std::uint64_t seed, std::uint64_t replication, StreamRole role, std::uint64_t id)
    : Rng(hash_key(seed, replication, static_cast<std::uint64_t>(role), id)) {}

double Rng::normal() {
  // Both distributions are stateless, so a local instance costs nothing.
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(*this);
}

double Rng::exponential() {
  boost::random::exponential_distribution<double> dist(1.0);
  return dist(*this);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire's nearly divisionless method.
  __extension__ typedef unsigned __int128 u128;
  u128 m = static_cast<u128>((*this)()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      m = static_cast<u128>((*this)()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  const double u = uniform();
  if (mean < 30.0) {
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  return poisson_quantile(mean, u);
}

double keyed_normal(std::uint64_t key) {
  std::uint64_t state = key;
  const double u1 = (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_ccdf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace mflab
