#include "mflab/common_noise.hpp"

#include <algorithm>
#include <cmath>

#include "mflab/errors.hpp"
#include "mflab/stats.hpp"

namespace mflab {

namespace {

constexpr std::size_t kLeaves = std::size_t{1} << CommonNoiseTree::kDepth;

std::uint64_t poisson_coupled(double mean, double z) {
  if (z <= 0.0) return poisson_quantile(mean, normal_cdf(z));
  return poisson_quantile_upper(mean, normal_ccdf(z));
}

std::uint64_t split_coupled(std::uint64_t n, double z) {
  if (n == 0) return 0;
  if (z <= 0.0) return binomial_half_quantile(n, normal_cdf(z));
  return binomial_half_quantile_upper(n, normal_ccdf(z));
}

void require_finite_support(const JumpLaw& nu) {
  if (!nu.has_finite_support()) throw Unsupported("common-noise coupling needs a finite-support jump law");
  if (nu.nodes().size() > 1024) throw Unsupported("common-noise coupling supports at most 1024 jump sizes");
  if (!(nu.zeta() > 0.0)) throw InvalidArgument("jump law must have positive variance");
}

}  // namespace

void DirectJumpSource::next_events(double expected, std::vector<double>& marks) {
  const std::uint64_t k = rng_.poisson(expected);
  for (std::uint64_t i = 0; i < k; ++i) marks.push_back(nu_.sample(rng_));
}

double DirectBrownian::increment(double clock) { return std::sqrt(clock) * rng_.normal(); }

CommonNoiseTree::CommonNoiseTree(const JumpLaw& nu, std::uint64_t seed, std::uint64_t replication)
    : nu_(nu), seed_(seed), replication_(replication) {
  require_finite_support(nu);
}

const CommonNoiseTree::Block& CommonNoiseTree::block(std::size_t b) {
  const std::size_t support = nu_.nodes().size();
  while (blocks_.size() <= b) {
    const std::size_t index = blocks_.size();
    auto blk = std::make_unique<Block>();
    blk->normals.assign(support, std::vector<double>(2 * kLeaves, 0.0));
    blk->values.assign(support, std::vector<double>(kLeaves + 1, 0.0));
    std::vector<double> inc(2 * kLeaves);
    for (std::size_t j = 0; j < support; ++j) {
      std::vector<double>& z = blk->normals[j];
      auto node_normal = [&](std::size_t i) {
        return keyed_normal(hash_key(seed_, replication_, static_cast<std::uint64_t>(StreamRole::Tree), j,
                                     (static_cast<std::uint64_t>(index) << 16) | i));
      };
      z[1] = node_normal(1);
      for (std::size_t i = 2; i < 2 * kLeaves; i += 2) z[i] = node_normal(i);
      // Increment of B_j over each node interval, refined by midpoint bridging.
      inc[1] = z[1];
      double width = 1.0;
      for (std::size_t level_start = 1; level_start < kLeaves; level_start *= 2, width *= 0.5) {
        const double half_sd = 0.5 * std::sqrt(width);
        for (std::size_t i = level_start; i < 2 * level_start; ++i) {
          inc[2 * i] = 0.5 * inc[i] + half_sd * z[2 * i];
          inc[2 * i + 1] = inc[i] - inc[2 * i];
        }
      }
      std::vector<double>& v = blk->values[j];
      v[0] = index == 0 ? 0.0 : blocks_[index - 1]->values[j][kLeaves];
      for (std::size_t k = 0; k < kLeaves; ++k) v[k + 1] = v[k] + inc[kLeaves + k];
    }
    blocks_.push_back(std::move(blk));
  }
  return *blocks_[b];
}

CoupledJumpSource::CoupledJumpSource(CommonNoiseTree& tree, std::size_t n_particles)
    : tree_(tree), n_(n_particles) {
  if (n_particles == 0) throw InvalidArgument("particle count must be positive");
  double max_rate = 0.0;
  for (const JumpAtom& a : tree.nu().nodes()) max_rate = std::max(max_rate, a.probability * static_cast<double>(n_));
  // Leaves carry O(1) expected events.
  depth_ = std::clamp(static_cast<int>(std::ceil(std::log2(std::max(1.0, max_rate)))), 0, CommonNoiseTree::kDepth);
}

void CoupledJumpSource::materialize(std::size_t b) {
  const CommonNoiseTree::Block& blk = tree_.block(b);
  const auto nodes = tree_.nu().nodes();
  const std::size_t leaves = std::size_t{1} << depth_;
  const double width = 1.0 / static_cast<double>(leaves);
  std::vector<std::uint64_t> counts(2 * leaves);
  events_.clear();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const std::vector<double>& z = blk.normals[j];
    counts[1] = poisson_coupled(nodes[j].probability * static_cast<double>(n_), z[1]);
    for (std::size_t i = 1; i < leaves; ++i) {
      counts[2 * i] = split_coupled(counts[i], z[2 * i]);
      counts[2 * i + 1] = counts[i] - counts[2 * i];
    }
    Rng rng(tree_.seed(), tree_.replication(), StreamRole::Jumps, hash_key(n_, b, j));
    for (std::size_t k = 0; k < leaves; ++k) {
      const double start = static_cast<double>(b) + static_cast<double>(k) * width;
      for (std::uint64_t c = 0; c < counts[leaves + k]; ++c)
        events_.push_back({start + width * rng.uniform(), static_cast<std::uint32_t>(j)});
    }
  }
  std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    return a.time < b.time || (a.time == b.time && a.support < b.support);
  });
  block_ = b;
  cursor_ = 0;
  ready_ = true;
}

void CoupledJumpSource::next_events(double expected, std::vector<double>& marks) {
  const double end = clock_ + expected / static_cast<double>(n_);
  const auto nodes = tree_.nu().nodes();
  if (!ready_) materialize(0);
  for (;;) {
    while (cursor_ < events_.size() && events_[cursor_].time < end) {
      marks.push_back(nodes[events_[cursor_].support].value);
      ++cursor_;
    }
    if (cursor_ < events_.size() || end < static_cast<double>(block_ + 1)) break;
    materialize(block_ + 1);
  }
  clock_ = end;
}

CoupledBrownian::CoupledBrownian(CommonNoiseTree& tree) : tree_(tree) {
  const double zeta = tree.nu().zeta();
  for (const JumpAtom& a : tree.nu().nodes()) weights_.push_back(a.value * std::sqrt(a.probability) / zeta);
  at_time_.assign(weights_.size(), 0.0);
  end_value_.assign(weights_.size(), 0.0);
}

double CoupledBrownian::value_at(double tau) {
  const auto leaf = static_cast<std::int64_t>(std::floor(tau * static_cast<double>(kLeaves)));
  if (leaf != leaf_) {
    leaf_ = leaf;
    const auto b = static_cast<std::size_t>(leaf) / kLeaves;
    const std::size_t k = static_cast<std::size_t>(leaf) % kLeaves;
    const CommonNoiseTree::Block& blk = tree_.block(b);
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      at_time_[j] = blk.values[j][k];
      end_value_[j] = blk.values[j][k + 1];
    }
    leaf_start_ = static_cast<double>(leaf) / static_cast<double>(kLeaves);
    leaf_end_ = static_cast<double>(leaf + 1) / static_cast<double>(kLeaves);
    state_time_ = leaf_start_;
    bridge_rng_ = Rng(tree_.seed(), tree_.replication(), StreamRole::Auxiliary, static_cast<std::uint64_t>(leaf));
  }
  if (tau > state_time_) {
    const double span = leaf_end_ - state_time_;
    const double r = (tau - state_time_) / span;
    const double sd = std::sqrt(std::max(0.0, (tau - state_time_) * (leaf_end_ - tau) / span));
    for (std::size_t j = 0; j < weights_.size(); ++j)
      at_time_[j] += r * (end_value_[j] - at_time_[j]) + sd * bridge_rng_.normal();
    state_time_ = tau;
  }
  double w = 0.0;
  for (std::size_t j = 0; j < weights_.size(); ++j) w += weights_[j] * at_time_[j];
  return w;
}

double CoupledBrownian::increment(double clock) {
  const double end = clock_ + clock;
  const double v = value_at(end);
  const double d = v - last_;
  last_ = v;
  clock_ = end;
  return d;
}

}  // namespace mflab
