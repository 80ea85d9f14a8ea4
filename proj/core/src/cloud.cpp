#include "mflab/cloud.hpp"

#include "mflab/errors.hpp"

namespace mflab {

namespace {

std::vector<std::int64_t> ticks_of(std::span<const double> positions) {
  if (positions.empty()) throw InvalidArgument("a particle cloud needs at least one particle");
  std::vector<std::int64_t> out(positions.size());
  for (std::size_t k = 0; k < positions.size(); ++k)
    if (!fixed_point::to_ticks(positions[k], out[k])) throw InvalidArgument("particle position out of range");
  return out;
}

DiscreteMeasure empirical_of(std::size_t n, auto&& position) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = position(k);
  return DiscreteMeasure::empirical(x);
}

}  // namespace

ParticleCloud::ParticleCloud(std::span<const double> positions) : raw_(ticks_of(positions)) {}

void ParticleCloud::positions(std::span<double> out) const {
  for (std::size_t k = 0; k < raw_.size(); ++k) out[k] = fixed_point::from_ticks(raw_[k] + offset_);
}

DiscreteMeasure ParticleCloud::empirical_measure() const {
  return empirical_of(size(), [&](std::size_t k) { return position(k); });
}

NaiveCloud::NaiveCloud(std::span<const double> positions) : ticks_(ticks_of(positions)) {}

void NaiveCloud::positions(std::span<double> out) const {
  for (std::size_t k = 0; k < ticks_.size(); ++k) out[k] = fixed_point::from_ticks(ticks_[k]);
}

DiscreteMeasure NaiveCloud::empirical_measure() const {
  return empirical_of(size(), [&](std::size_t k) { return position(k); });
}

}  // namespace mflab
