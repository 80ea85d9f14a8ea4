#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mflab/measure.hpp"

namespace mflab {

// Positions are stored as fixed-point integers with 2^-40 resolution, so that
// adding a common jump to an offset is exactly the same as adding it to
// every particle.
namespace fixed_point {
inline constexpr int kFractionBits = 40;
inline constexpr double kScale = 0x1.0p40;
inline constexpr double kInverseScale = 0x1.0p-40;
// Positions beyond this magnitude are treated as a numerical blowup.
inline constexpr double kMaxMagnitude = 0x1.0p20;

// False when x is not finite or too large to represent.
inline bool to_ticks(double x, std::int64_t& ticks) {
  if (!(std::abs(x) < kMaxMagnitude)) return false;
  // Round half away from zero; a single truncating conversion.
  ticks = static_cast<std::int64_t>(x * kScale + std::copysign(0.5, x));
  return true;
}
inline double from_ticks(std::int64_t ticks) { return static_cast<double>(ticks) * kInverseScale; }
}  // namespace fixed_point

// N particles as raw positions plus one global offset; the effective position
// of particle k is raw[k] + offset. Particles are kept in id order.
class ParticleCloud {
 public:
  ParticleCloud() = default;
  explicit ParticleCloud(std::span<const double> positions);

  std::size_t size() const { return raw_.size(); }
  double position(std::size_t k) const { return fixed_point::from_ticks(raw_[k] + offset_); }
  void positions(std::span<double> out) const;
  double global_offset() const { return fixed_point::from_ticks(offset_); }
  std::span<const std::int64_t> raw_ticks() const { return raw_; }
  std::int64_t offset_ticks() const { return offset_; }

  // O(1): moves every particle by the same amount.
  void apply_common_ticks(std::int64_t ticks) { offset_ += ticks; }
  void displace_ticks(std::size_t k, std::int64_t ticks) { raw_[k] += ticks; }

  DiscreteMeasure empirical_measure() const;

 private:
  std::vector<std::int64_t> raw_;
  std::int64_t offset_ = 0;
};

// Same interface, but a common jump is added to every particle explicitly.
// Reference implementation for checking the offset optimization.
class NaiveCloud {
 public:
  NaiveCloud() = default;
  explicit NaiveCloud(std::span<const double> positions);

  std::size_t size() const { return ticks_.size(); }
  double position(std::size_t k) const { return fixed_point::from_ticks(ticks_[k]); }
  void positions(std::span<double> out) const;
  void apply_common_ticks(std::int64_t ticks) {
    for (std::int64_t& t : ticks_) t += ticks;
  }
  void displace_ticks(std::size_t k, std::int64_t ticks) { ticks_[k] += ticks; }
  DiscreteMeasure empirical_measure() const;

 private:
  std::vector<std::int64_t> ticks_;
};

}  // namespace mflab
