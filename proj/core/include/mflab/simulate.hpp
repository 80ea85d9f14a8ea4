#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mflab/cloud.hpp"
#include "mflab/common_noise.hpp"
#include "mflab/functional.hpp"
#include "mflab/measure.hpp"
#include "mflab/model.hpp"
#include "mflab/rng.hpp"
#include "mflab/stats.hpp"

namespace mflab {

// Law of the i.i.d. initial positions. Particle k draws from its own stream
// keyed by (seed, replication, k), so the first N particles of any system
// built from the same law and seed coincide.
class InitialLaw {
 public:
  static InitialLaw normal(double mean, double sd);
  // i.i.d. draws from a discrete measure.
  static InitialLaw sampled_from(DiscreteMeasure m);
  // Deterministic: particle k starts at positions[k mod size]. For
  // m in E_N and a cloud size divisible by N this reproduces m exactly.
  static InitialLaw fixed(std::vector<double> positions);
  static InitialLaw fixed_from(const DiscreteMeasure& m, std::size_t n);

  double sample(std::uint64_t seed, std::uint64_t replication, std::uint64_t id) const;
  std::vector<double> draw(std::uint64_t seed, std::uint64_t replication, std::size_t n) const;

 private:
  enum class Kind { Normal, Measure, Fixed };
  Kind kind_ = Kind::Normal;
  double mean_ = 0.0, sd_ = 0.0;
  DiscreteMeasure measure_;
  std::vector<double> cdf_;
  std::vector<double> positions_;
};

struct SimConfig {
  std::size_t N = 1;      // particles in the N-particle system
  double dt = 1.0 / 256;  // time step
  double T = 1.0;         // horizon
  std::size_t M = 1;      // size of the conditional-law cloud for the limit
  std::uint64_t seed = 0;
  std::size_t replications = 1;
  // Idiosyncratic normals consumed per step: the increment uses
  // (xi_1 + ... + xi_s) / sqrt(s). A run at dt with s = 2 and a run at dt/2
  // with s = 1 share their Brownian paths.
  unsigned substeps = 1;
  // Drive the particle jumps and the limit's common noise from the shared
  // per-replication tree (requires finite-support nu).
  bool coupled = false;

  std::size_t steps() const;
  // Throws InvalidArgument unless dt > 0, T >= dt (or T == 0), N >= 1, M >= N
  // and T is a whole number of steps.
  void validate() const;
};

// Step indices for the given observation times; each must be a whole number
// of steps in [0, T].
std::vector<std::size_t> observation_steps(std::span<const double> times, double dt, double T);

// Idiosyncratic normals of particles [0, particles) for every step of a
// particle system, step-major. Recorded by the limit cloud and replayed by
// the particle systems of an N ladder; replay is bit-identical to drawing.
struct NoiseTable {
  std::size_t particles = 0;
  std::vector<double> values;
};

// Called with (step index, time, effective positions in particle-id order).
using Observer = std::function<void(std::size_t, double, std::span<const double>)>;

// One Euler-Maruyama step of the N-particle system: every particle moves by
// b dt + sigma sqrt(dt) xi; the jump events of the step, with intensities
// frozen at the pre-step measure, each move the whole cloud by u h / sqrt(N)
// through the global offset.
class ParticleStepper {
 public:
  ParticleStepper(const ModelSpec& model, std::size_t n, double dt, unsigned substeps, std::uint64_t seed,
                  std::uint64_t replication, JumpSource& jumps, std::span<const std::uint64_t> ids = {});

  void step(ParticleCloud& cloud, std::size_t step_index);
  void step(NaiveCloud& cloud, std::size_t step_index);
  // Replay normals for the first table->particles particles.
  void replay_noise(const NoiseTable* table) { replay_ = table; }

 private:
  template <class Cloud>
  void step_impl(Cloud& cloud, std::size_t step_index);

  const ModelSpec& model_;
  std::size_t n_;
  double dt_, sqrt_dt_;
  unsigned substeps_;
  JumpSource& jumps_;
  std::vector<Rng> noise_;
  const NoiseTable* replay_ = nullptr;
  Rng attribution_;
  std::vector<double> x_, f_, h_, b_, sigma_, prefix_, marks_;
};

// One step of the M-particle conditional-law cloud: b dt + sigma sqrt(dt) xi
// per particle plus the common term varsigma dW, with varsigma read from the
// cloud. The common Brownian motion is read in the internal clock
// (varsigma / zeta)^2 dt, which is how it is shared with the jump systems.
class LimitStepper {
 public:
  LimitStepper(const ModelSpec& model, std::size_t m, double dt, unsigned substeps, std::uint64_t seed,
               std::uint64_t replication, BrownianSource& common);

  void step(ParticleCloud& cloud, std::size_t step_index);
  // Record, for the first table->particles particles, the normals a particle
  // system with `group` substeps per step would draw.
  void record_noise(NoiseTable* table, unsigned group);

 private:
  const ModelSpec& model_;
  std::size_t m_;
  NoiseTable* record_ = nullptr;
  unsigned group_ = 1;
  std::vector<double> pending_;
  double dt_, sqrt_dt_;
  unsigned substeps_;
  BrownianSource& common_;
  std::vector<Rng> noise_;
  std::vector<double> x_, f_, h_, b_, sigma_;
};

// Full runs for one replication. Observers see the requested steps (sorted).
void run_particle_system(const SimConfig& config, const ModelSpec& model, std::span<const double> initial,
                         std::uint64_t replication, JumpSource& jumps, std::span<const std::size_t> observe,
                         const Observer& observer, std::span<const std::uint64_t> ids = {},
                         const NoiseTable* replay = nullptr);
void run_limit_process(const SimConfig& config, const ModelSpec& model, std::span<const double> initial,
                       std::uint64_t replication, BrownianSource& common, std::span<const std::size_t> observe,
                       const Observer& observer, NoiseTable* record = nullptr, unsigned record_group = 1);

struct Snapshot {
  double time = 0.0;
  std::vector<double> positions;
  DiscreteMeasure measure() const { return DiscreteMeasure::empirical(positions); }
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
};

// Convenience wrappers with the noise sources chosen from config.coupled.
Trajectory simulate_particle_system(const SimConfig& config, const ModelSpec& model, const InitialLaw& initial,
                                    std::uint64_t replication, std::span<const double> times);
// Explicit particles: positions[k] carries stream id ids[k]. Particles are
// simulated in id order and reported in the caller's order.
Trajectory simulate_particle_system(const SimConfig& config, const ModelSpec& model,
                                    std::span<const double> positions, std::span<const std::uint64_t> ids,
                                    std::uint64_t replication, std::span<const double> times);
Trajectory simulate_limit_process(const SimConfig& config, const ModelSpec& model, const InitialLaw& initial,
                                  std::uint64_t replication, std::span<const double> times);

enum class SystemKind { Particle, Limit };

// E[G_1(mu_{t_1}) ... G_n(mu_{t_n})] over config.replications independent
// replications, for the particle system (N) or the limit cloud (M).
struct WeakValueSpec {
  SystemKind system = SystemKind::Particle;
  std::vector<std::pair<PolynomialFunctional, double>> factors;
};

MeanEstimate estimate_weak_value(const SimConfig& config, const ModelSpec& model, const InitialLaw& initial,
                                 const WeakValueSpec& spec, unsigned threads = 1);

}  // namespace mflab
