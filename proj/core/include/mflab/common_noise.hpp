#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "mflab/model.hpp"
#include "mflab/rng.hpp"

namespace mflab {

// Jump events of the N-particle system, one Euler step at a time.
class JumpSource {
 public:
  virtual ~JumpSource() = default;
  // Appends the marks u of the events in the next step, where `expected` is
  // dt times the total intensity of the cloud.
  virtual void next_events(double expected, std::vector<double>& marks) = 0;
};

// Standard Brownian motion in an internal clock, queried sequentially.
class BrownianSource {
 public:
  virtual ~BrownianSource() = default;
  // Increment over the next `clock` units of internal time.
  virtual double increment(double clock) = 0;
};

// Poisson count with a single uniform, i.i.d. marks from nu.
class DirectJumpSource final : public JumpSource {
 public:
  DirectJumpSource(const JumpLaw& nu, Rng rng) : nu_(nu), rng_(rng) {}
  void next_events(double expected, std::vector<double>& marks) override;

 private:
  const JumpLaw& nu_;
  Rng rng_;
};

class DirectBrownian final : public BrownianSource {
 public:
  explicit DirectBrownian(Rng rng) : rng_(rng) {}
  double increment(double clock) override;

 private:
  Rng rng_;
};

// Per-replication source of common randomness shared by the limit process
// and every particle system of an N ladder.
//
// For each support point u_j of nu there is a Brownian motion B_j in an
// internal clock, built block by block (blocks of unit length) on a dyadic
// tree whose node normals depend only on (seed, replication, j, node).
// The particle system with N particles runs one Poisson process of rate
// N p_j per support point in the same internal clock; its counts on the same
// dyadic tree are quantile-coupled to the Brownian node normals, so the
// compensated jump sums track B_j as N grows. The limit reads the Brownian
// motion W = sum_j u_j sqrt(p_j) B_j / zeta. Both sides are exact in law.
class CommonNoiseTree {
 public:
  static constexpr int kDepth = 10;

  CommonNoiseTree(const JumpLaw& nu, std::uint64_t seed, std::uint64_t replication);

  const JumpLaw& nu() const { return nu_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t replication() const { return replication_; }

  struct Block {
    // normals[j][i] for heap index i (root 1, then left children 2i).
    std::vector<std::vector<double>> normals;
    // value[j][k]: B_j at internal time (block + k / 2^kDepth), k = 0..2^kDepth.
    std::vector<std::vector<double>> values;
  };
  const Block& block(std::size_t b);

 private:
  const JumpLaw& nu_;
  std::uint64_t seed_;
  std::uint64_t replication_;
  std::vector<std::unique_ptr<Block>> blocks_;
};

class CoupledJumpSource final : public JumpSource {
 public:
  CoupledJumpSource(CommonNoiseTree& tree, std::size_t n_particles);
  void next_events(double expected, std::vector<double>& marks) override;
  int depth() const { return depth_; }

 private:
  struct Event {
    double time;
    std::uint32_t support;
  };
  void materialize(std::size_t b);

  CommonNoiseTree& tree_;
  std::size_t n_;
  int depth_;
  double clock_ = 0.0;
  std::size_t block_ = 0;
  std::size_t cursor_ = 0;
  std::vector<Event> events_;
  bool ready_ = false;
};

class CoupledBrownian final : public BrownianSource {
 public:
  explicit CoupledBrownian(CommonNoiseTree& tree);
  double increment(double clock) override;

 private:
  double value_at(double tau);

  CommonNoiseTree& tree_;
  std::vector<double> weights_;
  double clock_ = 0.0;
  double last_ = 0.0;
  // Bridge state inside the current finest leaf.
  std::int64_t leaf_ = -1;
  double leaf_start_ = 0.0, leaf_end_ = 0.0;
  std::vector<double> at_time_, end_value_;
  double state_time_ = 0.0;
  Rng bridge_rng_;
};

}  // namespace mflab
