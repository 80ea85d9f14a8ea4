#pragma once

#include <cstdint>
#include <limits>

namespace mflab {

// Purposes a random stream can serve. Streams for different roles never
// overlap, which keeps coupled simulations aligned draw-for-draw.
enum class StreamRole : std::uint64_t {
  Initial = 1,
  Idiosyncratic = 2,
  Jumps = 3,
  Attribution = 4,
  Common = 5,
  Tree = 6,
  Auxiliary = 7,
};

std::uint64_t splitmix64(std::uint64_t& state);

// Stateless 64-bit mixing of a key tuple into a seed.
std::uint64_t hash_key(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0, std::uint64_t d = 0,
                       std::uint64_t e = 0);

// xoshiro256++ with a few sampling helpers. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);
  // Independent stream for (seed, replication, role, id).
  Rng(std::uint64_t seed, std::uint64_t replication, StreamRole role, std::uint64_t id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }
  double normal();
  double exponential();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Poisson(mean) by inversion of a single uniform.
  std::uint64_t poisson(double mean);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Standard normal from a single stateless key; used where values must not
// depend on the order in which they are requested.
double keyed_normal(std::uint64_t key);

// Standard normal CDF and its upper tail, accurate in both tails.
double normal_cdf(double z);
double normal_ccdf(double z);

}  // namespace mflab
