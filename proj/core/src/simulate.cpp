#include "mflab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mflab/errors.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

// ------------------------------------------------------------ InitialLaw

InitialLaw InitialLaw::normal(double mean, double sd) {
  if (!std::isfinite(mean) || !(sd >= 0.0) || !std::isfinite(sd)) throw InvalidArgument("invalid normal initial law");
  InitialLaw law;
  law.kind_ = Kind::Normal;
  law.mean_ = mean;
  law.sd_ = sd;
  return law;
}

InitialLaw InitialLaw::sampled_from(DiscreteMeasure m) {
  InitialLaw law;
  law.kind_ = Kind::Measure;
  double acc = 0.0;
  for (const Atom& a : m.atoms()) law.cdf_.push_back(acc += a.weight);
  law.measure_ = std::move(m);
  return law;
}

InitialLaw InitialLaw::fixed(std::vector<double> positions) {
  if (positions.empty()) throw InvalidArgument("fixed initial law needs at least one position");
  InitialLaw law;
  law.kind_ = Kind::Fixed;
  law.positions_ = std::move(positions);
  return law;
}

InitialLaw InitialLaw::fixed_from(const DiscreteMeasure& m, std::size_t n) {
  return fixed(m.expand_empirical(n));
}

double InitialLaw::sample(std::uint64_t seed, std::uint64_t replication, std::uint64_t id) const {
  switch (kind_) {
    case Kind::Normal: {
      Rng rng(seed, replication, StreamRole::Initial, id);
      return mean_ + sd_ * rng.normal();
    }
    case Kind::Measure: {
      Rng rng(seed, replication, StreamRole::Initial, id);
      const double u = rng.uniform() * cdf_.back();
      auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
      if (it == cdf_.end()) --it;
      return measure_.atoms()[static_cast<std::size_t>(it - cdf_.begin())].position;
    }
    case Kind::Fixed:
      return positions_[id % positions_.size()];
  }
  return 0.0;
}

std::vector<double> InitialLaw::draw(std::uint64_t seed, std::uint64_t replication, std::size_t n) const {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = sample(seed, replication, k);
  return out;
}

// ------------------------------------------------------------- SimConfig

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidArgument("T must be non-negative");
  if (T > 0.0 && T < dt * (1.0 - 1e-12)) throw InvalidArgument("T must be at least dt");
  const double ratio = T / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
    throw InvalidArgument("T must be a whole number of steps");
  if (N < 1) throw InvalidArgument("N must be at least 1");
  if (M < N) throw InvalidArgument("M must be at least N");
  if (substeps < 1) throw InvalidArgument("substeps must be at least 1");
  if (replications < 1) throw InvalidArgument("replications must be at least 1");
}

std::vector<std::size_t> observation_steps(std::span<const double> times, double dt, double T) {
  std::vector<std::size_t> out;
  for (double t : times) {
    if (!(t >= 0.0) || t > T * (1.0 + 1e-12)) throw InvalidArgument("observation time outside [0, T]");
    const double ratio = t / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
      throw InvalidArgument("observation times must be whole numbers of steps");
    out.push_back(static_cast<std::size_t>(std::llround(ratio)));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// -------------------------------------------------------------- steppers

namespace {

[[noreturn]] void blowup(std::size_t step) {
  throw NumericalBlowup("non-finite or exploding state", static_cast<std::int64_t>(step));
}

inline std::int64_t ticks_or_blowup(double v, std::size_t step) {
  std::int64_t t = 0;
  if (!fixed_point::to_ticks(v, t)) [[unlikely]]
    blowup(step);
  return t;
}

void check_positions(std::span<const double> x, std::size_t step) {
  bool ok = true;
  for (double v : x) ok &= std::abs(v) < fixed_point::kMaxMagnitude;
  if (!ok) blowup(step);
}

double idiosyncratic_normal(Rng& rng, unsigned substeps) {
  if (substeps == 1) return rng.normal();
  double s = 0.0;
  for (unsigned i = 0; i < substeps; ++i) s += rng.normal();
  return s / std::sqrt(static_cast<double>(substeps));
}

}  // namespace

ParticleStepper::ParticleStepper(const ModelSpec& model, std::size_t n, double dt, unsigned substeps,
                                 std::uint64_t seed, std::uint64_t replication, JumpSource& jumps,
                                 std::span<const std::uint64_t> ids)
    : model_(model),
      n_(n),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      substeps_(substeps),
      jumps_(jumps),
      attribution_(seed, replication, StreamRole::Attribution, n),
      x_(n), f_(n), h_(n), b_(n), sigma_(n) {
  if (!ids.empty() && ids.size() != n) throw InvalidArgument("one stream id per particle required");
  noise_.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    noise_.emplace_back(seed, replication, StreamRole::Idiosyncratic, ids.empty() ? k : ids[k]);
}

template <class Cloud>
void ParticleStepper::step_impl(Cloud& cloud, std::size_t step_index) {
  if (cloud.size() != n_) throw InvalidArgument("cloud size does not match the stepper");
  const CoefficientSet& c = *model_.coefficients;
  cloud.positions(x_);
  check_positions(x_, step_index);

  MeasureStats s = c.first_stage(x_, {});
  const bool constant_h = c.amplitude_is_constant();
  c.intensity_batch(s, x_, f_, constant_h ? std::span<double>{} : std::span<double>(h_));
  double total = 0.0, h2f = 0.0;
  for (std::size_t k = 0; k < n_; ++k) total += f_[k];
  const double inv_n = 1.0 / static_cast<double>(n_);
  const double h0 = constant_h ? c.amplitude(s, x_[0]) : 0.0;
  if (constant_h) {
    h2f = h0 * h0 * total * inv_n;
  } else {
    for (std::size_t k = 0; k < n_; ++k) h2f += h_[k] * h_[k] * f_[k];
    h2f *= inv_n;
  }
  s.f_mean = total * inv_n;
  s.h2f = h2f;
  c.drift_batch(s, x_, b_, sigma_);

  // Jumps, with intensities frozen at the pre-step measure.
  marks_.clear();
  if (total > 0.0) jumps_.next_events(dt_ * total, marks_);
  if (!marks_.empty()) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    if (!constant_h) {
      prefix_.resize(n_);
      double acc = 0.0;
      for (std::size_t k = 0; k < n_; ++k) prefix_[k] = acc += f_[k];
    }
    for (double u : marks_) {
      double h = h0;
      if (!constant_h) {
        const double target = attribution_.uniform() * prefix_.back();
        auto it = std::lower_bound(prefix_.begin(), prefix_.end(), target);
        if (it == prefix_.end()) --it;
        h = h_[static_cast<std::size_t>(it - prefix_.begin())];
      }
      cloud.apply_common_ticks(ticks_or_blowup(u * h * scale, step_index));
    }
  }

  std::size_t k = 0;
  if (replay_ != nullptr) {
    const std::size_t count = std::min(replay_->particles, n_);
    const std::size_t base = step_index * replay_->particles;
    if (base + replay_->particles > replay_->values.size()) throw InvalidArgument("noise table too short");
    const double* xi = replay_->values.data() + base;
    for (; k < count; ++k)
      cloud.displace_ticks(k, ticks_or_blowup(b_[k] * dt_ + sigma_[k] * sqrt_dt_ * xi[k], step_index));
  }
  for (; k < n_; ++k) {
    const double xi = idiosyncratic_normal(noise_[k], substeps_);
    cloud.displace_ticks(k, ticks_or_blowup(b_[k] * dt_ + sigma_[k] * sqrt_dt_ * xi, step_index));
  }
}

void ParticleStepper::step(ParticleCloud& cloud, std::size_t step_index) { step_impl(cloud, step_index); }
void ParticleStepper::step(NaiveCloud& cloud, std::size_t step_index) { step_impl(cloud, step_index); }

LimitStepper::LimitStepper(const ModelSpec& model, std::size_t m, double dt, unsigned substeps, std::uint64_t seed,
                           std::uint64_t replication, BrownianSource& common)
    : model_(model),
      m_(m),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      substeps_(substeps),
      common_(common),
      x_(m), f_(m), h_(m), b_(m), sigma_(m) {
  noise_.reserve(m);
  for (std::size_t k = 0; k < m; ++k) noise_.emplace_back(seed, replication, StreamRole::Idiosyncratic, k);
}

void LimitStepper::step(ParticleCloud& cloud, std::size_t step_index) {
  if (cloud.size() != m_) throw InvalidArgument("cloud size does not match the stepper");
  const CoefficientSet& c = *model_.coefficients;
  cloud.positions(x_);
  check_positions(x_, step_index);

  MeasureStats s = c.first_stage(x_, {});
  c.intensity_batch(s, x_, f_, h_);
  double fsum = 0.0, h2f = 0.0;
  for (std::size_t k = 0; k < m_; ++k) {
    fsum += f_[k];
    h2f += h_[k] * h_[k] * f_[k];
  }
  const double inv_m = 1.0 / static_cast<double>(m_);
  s.f_mean = fsum * inv_m;
  s.h2f = h2f * inv_m;
  c.drift_batch(s, x_, b_, sigma_);

  const double zeta = c.zeta();
  const bool per_particle = c.common_volatility_depends_on_x();
  double dw = 0.0;
  if (zeta > 0.0) {
    if (per_particle) {
      dw = common_.increment(dt_);
    } else {
      const double v = c.common_volatility(s, x_[0]) / zeta;
      cloud.apply_common_ticks(ticks_or_blowup(zeta * common_.increment(v * v * dt_), step_index));
    }
  }
  const std::size_t recorded = record_ != nullptr ? record_->particles : 0;
  for (std::size_t k = 0; k < m_; ++k) {
    const double xi = idiosyncratic_normal(noise_[k], substeps_);
    if (k < recorded) {
      // Same arithmetic as idiosyncratic_normal with `group` draws.
      pending_[k] += xi;
      if ((step_index + 1) % group_ == 0) {
        record_->values.push_back(group_ == 1 ? pending_[k] : pending_[k] / std::sqrt(static_cast<double>(group_)));
        pending_[k] = 0.0;
      }
    }
    double inc = b_[k] * dt_ + sigma_[k] * sqrt_dt_ * xi;
    if (per_particle) inc += c.common_volatility(s, x_[k]) * dw;
    cloud.displace_ticks(k, ticks_or_blowup(inc, step_index));
  }
}

void LimitStepper::record_noise(NoiseTable* table, unsigned group) {
  if (table != nullptr) {
    if (table->particles > m_) throw InvalidArgument("cannot record more particles than the cloud has");
    if (substeps_ != 1 || group < 1) throw InvalidArgument("noise recording needs one draw per limit step");
    table->values.clear();
    pending_.assign(table->particles, 0.0);
  }
  record_ = table;
  group_ = group;
}

// ------------------------------------------------------------------ runs

namespace {

template <class Stepper>
void run(ParticleCloud& cloud, Stepper& stepper, std::size_t steps, double dt, std::span<const std::size_t> observe,
         const Observer& observer) {
  std::vector<double> x(cloud.size());
  std::size_t next = 0;
  for (std::size_t step = 0;; ++step) {
    while (next < observe.size() && observe[next] < step) ++next;
    if (next < observe.size() && observe[next] == step) {
      cloud.positions(x);
      check_positions(x, step);
      observer(step, static_cast<double>(step) * dt, x);
    }
    if (step == steps) break;
    stepper.step(cloud, step);
  }
}

}  // namespace

void run_particle_system(const SimConfig& config, const ModelSpec& model, std::span<const double> initial,
                         std::uint64_t replication, JumpSource& jumps, std::span<const std::size_t> observe,
                         const Observer& observer, std::span<const std::uint64_t> ids, const NoiseTable* replay) {
  if (initial.size() != config.N) throw InvalidArgument("initial positions must number N");
  ParticleCloud cloud(initial);
  ParticleStepper stepper(model, config.N, config.dt, config.substeps, config.seed, replication, jumps, ids);
  if (replay != nullptr && !ids.empty()) throw InvalidArgument("noise replay assumes canonical particle ids");
  stepper.replay_noise(replay);
  run(cloud, stepper, config.steps(), config.dt, observe, observer);
}

void run_limit_process(const SimConfig& config, const ModelSpec& model, std::span<const double> initial,
                       std::uint64_t replication, BrownianSource& common, std::span<const std::size_t> observe,
                       const Observer& observer, NoiseTable* record, unsigned record_group) {
  if (initial.size() != config.M) throw InvalidArgument("initial positions must number M");
  ParticleCloud cloud(initial);
  LimitStepper stepper(model, config.M, config.dt, config.substeps, config.seed, replication, common);
  stepper.record_noise(record, record_group);
  run(cloud, stepper, config.steps(), config.dt, observe, observer);
}

namespace {

struct Sources {
  std::unique_ptr<CommonNoiseTree> tree;
  std::unique_ptr<JumpSource> jumps;
  std::unique_ptr<BrownianSource> brownian;
};

Sources make_sources(const SimConfig& config, const ModelSpec& model, std::uint64_t replication, std::size_t n) {
  Sources s;
  if (config.coupled) {
    s.tree = std::make_unique<CommonNoiseTree>(model.nu, config.seed, replication);
    s.jumps = std::make_unique<CoupledJumpSource>(*s.tree, n);
    s.brownian = std::make_unique<CoupledBrownian>(*s.tree);
  } else {
    s.jumps = std::make_unique<DirectJumpSource>(model.nu, Rng(config.seed, replication, StreamRole::Jumps, n));
    s.brownian = std::make_unique<DirectBrownian>(Rng(config.seed, replication, StreamRole::Common, 0));
  }
  return s;
}

Observer collect(Trajectory& out) {
  return [&out](std::size_t, double t, std::span<const double> x) {
    out.snapshots.push_back({t, std::vector<double>(x.begin(), x.end())});
  };
}

}  // namespace

Trajectory simulate_particle_system(const SimConfig& config, const ModelSpec& model, const InitialLaw& initial,
                                    std::uint64_t replication, std::span<const double> times) {
  config.validate();
  const std::vector<double> x0 = initial.draw(config.seed, replication, config.N);
  Sources src = make_sources(config, model, replication, config.N);
  Trajectory out;
  const auto steps = observation_steps(times, config.dt, config.T);
  run_particle_system(config, model, x0, replication, *src.jumps, steps, collect(out));
  return out;
}

Trajectory simulate_particle_system(const SimConfig& config, const ModelSpec& model,
                                    std::span<const double> positions, std::span<const std::uint64_t> ids,
                                    std::uint64_t replication, std::span<const double> times) {
  config.validate();
  if (positions.size() != config.N || ids.size() != config.N)
    throw InvalidArgument("need N positions and N particle ids");
  std::vector<std::size_t> order(config.N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t k = 1; k < order.size(); ++k)
    if (ids[order[k]] == ids[order[k - 1]]) throw InvalidArgument("particle ids must be distinct");
  std::vector<double> x0(config.N);
  std::vector<std::uint64_t> sorted_ids(config.N);
  for (std::size_t k = 0; k < config.N; ++k) {
    x0[k] = positions[order[k]];
    sorted_ids[k] = ids[order[k]];
  }
  Sources src = make_sources(config, model, replication, config.N);
  Trajectory out;
  const auto steps = observation_steps(times, config.dt, config.T);
  auto observer = [&](std::size_t, double t, std::span<const double> x) {
    Snapshot snap{t, std::vector<double>(config.N)};
    for (std::size_t k = 0; k < config.N; ++k) snap.positions[order[k]] = x[k];
    out.snapshots.push_back(std::move(snap));
  };
  run_particle_system(config, model, x0, replication, *src.jumps, steps, observer, sorted_ids);
  return out;
}

Trajectory simulate_limit_process(const SimConfig& config, const ModelSpec& model, const InitialLaw& initial,
                                  std::uint64_t replication, std::span<const double> times) {
  config.validate();
  const std::vector<double> x0 = initial.draw(config.seed, replication, config.M);
  Sources src = make_sources(config, model, replication, config.M);
  Trajectory out;
  const auto steps = observation_steps(times, config.dt, config.T);
  run_limit_process(config, model, x0, replication, *src.brownian, steps, collect(out));
  return out;
}

MeanEstimate estimate_weak_value(const SimConfig& config, const ModelSpec& model, const InitialLaw& initial,
                                 const WeakValueSpec& spec, unsigned threads) {
  config.validate();
  if (config.replications < 2) throw InvalidArgument("weak-value estimation needs at least two replications");
  std::vector<double> times;
  for (const auto& f : spec.factors) times.push_back(f.second);
  const auto steps = observation_steps(times, config.dt, config.T);
  std::vector<double> values(config.replications);
  parallel_for(config.replications, threads, [&](std::size_t rep) {
    std::map<std::size_t, DiscreteMeasure> snaps;
    auto observer = [&](std::size_t step, double, std::span<const double> x) {
      snaps.emplace(step, DiscreteMeasure::empirical(x));
    };
    const bool particle = spec.system == SystemKind::Particle;
    const std::size_t n = particle ? config.N : config.M;
    const std::vector<double> x0 = initial.draw(config.seed, rep, n);
    Sources src = make_sources(config, model, rep, n);
    if (particle)
      run_particle_system(config, model, x0, rep, *src.jumps, steps, observer);
    else
      run_limit_process(config, model, x0, rep, *src.brownian, steps, observer);
    double product = 1.0;
    for (const auto& [g, t] : spec.factors) {
      const auto step = static_cast<std::size_t>(std::llround(t / config.dt));
      product *= BoundFunctional(g, snaps.at(step)).value();
    }
    values[rep] = product;
  });
  return mean_and_std_error(values);
}

}  // namespace mflab
