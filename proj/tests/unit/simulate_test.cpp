#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mflab/cloud.hpp"
#include "mflab/common_noise.hpp"
#include "mflab/errors.hpp"
#include "mflab/kernel_registry.hpp"
#include "mflab/model.hpp"
#include "mflab/simulate.hpp"

using namespace mflab;

namespace {

std::vector<double> positions(const ParticleCloud& c) {
  std::vector<double> x(c.size());
  c.positions(x);
  return x;
}
std::vector<double> positions(const NaiveCloud& c) {
  std::vector<double> x(c.size());
  c.positions(x);
  return x;
}

}  // namespace

TEST(SimConfig, Validation) {
  SimConfig c;
  c.N = 4;
  c.M = 4;
  c.dt = 0.1;
  c.T = 1.0;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.steps(), 10u);
  c.T = 1.05;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.T = 1.0;
  c.M = 2;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.M = 4;
  c.dt = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  const std::vector<double> bad = {0.35};
  EXPECT_THROW(observation_steps(bad, 0.1, 1.0), InvalidArgument);
}

TEST(Simulate, GlobalOffsetIsBitIdenticalToNaiveJumps) {
  for (const char* name : {"common_shift", "ou_tanh", "mf_tanh"}) {
    const ModelSpec model = builtin_model(name);
    for (std::size_t n : {1, 2, 5, 16}) {
      const double dt = 1.0 / 64;
      std::vector<double> x0(n);
      for (std::size_t k = 0; k < n; ++k) x0[k] = 0.3 * static_cast<double>(k) - 1.0;
      DirectJumpSource ja(model.nu, Rng(3, 0, StreamRole::Jumps, n)), jb(model.nu, Rng(3, 0, StreamRole::Jumps, n));
      ParticleStepper sa(model, n, dt, 1, 3, 0, ja), sb(model, n, dt, 1, 3, 0, jb);
      ParticleCloud fast(x0);
      NaiveCloud naive(x0);
      for (std::size_t step = 0; step < 1000; ++step) {
        sa.step(fast, step);
        sb.step(naive, step);
        ASSERT_EQ(positions(fast), positions(naive)) << name << " n " << n << " step " << step;
      }
      if (std::string(name) == "common_shift") EXPECT_NE(fast.offset_ticks(), 0) << "no jumps happened";
    }
  }
}

TEST(Simulate, DeterministicFlowMatchesEulerRecursion) {
  const ModelSpec model = builtin_model("pure_drift");
  SimConfig c;
  c.N = 3;
  c.M = 3;
  c.dt = 1.0 / 128;
  c.T = 1.0;
  const std::vector<double> x0 = {-1.0, 0.5, 2.0}, times = {1.0};
  const std::vector<std::uint64_t> ids = {0, 1, 2};
  const Trajectory tr = simulate_particle_system(c, model, x0, ids, 0, times);
  ASSERT_EQ(tr.snapshots.size(), 1u);
  const double factor = std::pow(1.0 - c.dt, 128);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(tr.snapshots[0].positions[k], factor * x0[k], 1e-9);
  const Trajectory lim = simulate_limit_process(c, model, InitialLaw::fixed(x0), 0, times);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(lim.snapshots[0].positions[k], factor * x0[k], 1e-9);
}

TEST(Simulate, OuMomentsMatchEulerRecursion) {
  // Euler for dX = -X dt + 0.5 dB: mean (1 - dt)^n mu, variance
  // v <- (1 - dt)^2 v + 0.25 dt.
  const ModelSpec model = builtin_model("ou");
  SimConfig c;
  c.N = 8;
  c.M = 8;
  c.dt = 1.0 / 32;
  c.T = 0.5;
  c.seed = 5;
  c.replications = 4000;
  const double mu = 1.5;
  double mean = mu, var = 1.0;
  for (std::size_t k = 0; k < c.steps(); ++k) {
    mean *= 1.0 - c.dt;
    var = (1.0 - c.dt) * (1.0 - c.dt) * var + 0.25 * c.dt;
  }
  const InitialLaw init = InitialLaw::normal(mu, 1.0);
  const WeakValueSpec m1{SystemKind::Particle, {{builtin_functional("mean"), c.T}}};
  const WeakValueSpec m2{SystemKind::Particle, {{builtin_functional("second_moment"), c.T}}};
  const MeanEstimate e1 = estimate_weak_value(c, model, init, m1);
  const MeanEstimate e2 = estimate_weak_value(c, model, init, m2);
  EXPECT_NEAR(e1.mean, mean, 5.0 * e1.std_error);
  EXPECT_NEAR(e2.mean, var + mean * mean, 5.0 * e2.std_error);
}

TEST(Simulate, CommonShiftVarianceGrowth) {
  // b = sigma = 0, f = h = 1: jumps of u / sqrt(N) at total rate N, so the
  // mean performs a compound Poisson walk with variance T E[u^2]; the limit
  // moves by zeta W_t.
  const ModelSpec model = builtin_model("common_shift", "asymmetric");
  SimConfig c;
  c.N = 16;
  c.M = 16;
  c.dt = 1.0 / 16;
  c.T = 1.0;
  c.seed = 7;
  c.replications = 4000;
  const WeakValueSpec p{SystemKind::Particle, {{builtin_functional("mean_squared"), c.T}}};
  const WeakValueSpec l{SystemKind::Limit, {{builtin_functional("mean_squared"), c.T}}};
  const InitialLaw init = InitialLaw::fixed({0.0});
  for (bool coupled : {false, true}) {
    c.coupled = coupled;
    const MeanEstimate ep = estimate_weak_value(c, model, init, p);
    const MeanEstimate el = estimate_weak_value(c, model, init, l);
    EXPECT_NEAR(ep.mean, 1.0, 5.0 * ep.std_error) << coupled;
    EXPECT_NEAR(el.mean, 1.0, 5.0 * el.std_error) << coupled;
  }
}

TEST(Simulate, RunsAreDeterministicAndThreadInvariant) {
  const ModelSpec model = builtin_model("mf_tanh");
  SimConfig c;
  c.N = 12;
  c.M = 12;
  c.dt = 1.0 / 32;
  c.T = 0.5;
  c.seed = 9;
  c.replications = 64;
  const std::vector<double> times = {0.25, 0.5};
  const InitialLaw init = InitialLaw::normal(0.0, 1.0);
  for (bool coupled : {false, true}) {
    c.coupled = coupled;
    const Trajectory a = simulate_particle_system(c, model, init, 3, times);
    const Trajectory b = simulate_particle_system(c, model, init, 3, times);
    ASSERT_EQ(a.snapshots.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.snapshots[i].positions, b.snapshots[i].positions);
    const WeakValueSpec spec{SystemKind::Particle, {{builtin_functional("tanh_mean"), 0.5}}};
    const MeanEstimate one = estimate_weak_value(c, model, init, spec, 1);
    const MeanEstimate three = estimate_weak_value(c, model, init, spec, 3);
    EXPECT_EQ(one.mean, three.mean);
    EXPECT_EQ(one.std_error, three.std_error);
  }
}

TEST(Simulate, ExplicitIdsFollowTheCaller) {
  const ModelSpec model = builtin_model("ou_tanh");
  SimConfig c;
  c.N = 3;
  c.M = 3;
  c.dt = 1.0 / 16;
  c.T = 0.25;
  c.seed = 2;
  const std::vector<double> times = {0.25};
  const std::vector<double> x = {0.1, 0.2, 0.3};
  const std::vector<std::uint64_t> ids = {0, 1, 2};
  const std::vector<double> xp = {0.3, 0.1, 0.2};
  const std::vector<std::uint64_t> idsp = {2, 0, 1};
  const Trajectory a = simulate_particle_system(c, model, x, ids, 0, times);
  const Trajectory b = simulate_particle_system(c, model, xp, idsp, 0, times);
  EXPECT_EQ(a.snapshots[0].positions[0], b.snapshots[0].positions[1]);
  EXPECT_EQ(a.snapshots[0].positions[1], b.snapshots[0].positions[2]);
  EXPECT_EQ(a.snapshots[0].positions[2], b.snapshots[0].positions[0]);
  const std::vector<std::uint64_t> dup = {0, 0, 1};
  EXPECT_THROW(simulate_particle_system(c, model, x, dup, 0, times), InvalidArgument);
}

TEST(Simulate, ReplayedNoiseIsBitIdenticalToDrawing) {
  const ModelSpec model = builtin_model("mf_tanh", "rademacher");
  const std::size_t n = 6, m = 24;
  const double dt = 1.0 / 32;
  SimConfig pc;
  pc.N = n;
  pc.M = n;
  pc.dt = dt;
  pc.T = 0.5;
  pc.seed = 4;
  pc.substeps = 2;
  SimConfig lc = pc;
  lc.N = m;
  lc.M = m;
  lc.dt = dt / 2;
  lc.substeps = 1;
  const InitialLaw init = InitialLaw::normal(0.0, 1.0);
  const std::vector<double> x0 = init.draw(4, 0, m);
  const std::vector<double> xn(x0.begin(), x0.begin() + n);

  NoiseTable table;
  table.particles = n;
  DirectBrownian w(Rng(4, 0, StreamRole::Common, 0));
  run_limit_process(lc, model, x0, 0, w, {}, {}, &table, 2);
  EXPECT_EQ(table.values.size(), n * pc.steps());

  const std::vector<std::size_t> all = {pc.steps()};
  std::vector<double> drawn, replayed;
  auto grab = [](std::vector<double>& out) {
    return [&out](std::size_t, double, std::span<const double> x) { out.assign(x.begin(), x.end()); };
  };
  DirectJumpSource j1(model.nu, Rng(4, 0, StreamRole::Jumps, n)), j2(model.nu, Rng(4, 0, StreamRole::Jumps, n));
  run_particle_system(pc, model, xn, 0, j1, all, grab(drawn));
  run_particle_system(pc, model, xn, 0, j2, all, grab(replayed), {}, &table);
  ASSERT_EQ(drawn.size(), n);
  EXPECT_EQ(drawn, replayed);

  NoiseTable short_table = table;
  short_table.values.resize(n);
  DirectJumpSource j3(model.nu, Rng(4, 0, StreamRole::Jumps, n));
  EXPECT_THROW(run_particle_system(pc, model, xn, 0, j3, all, grab(replayed), {}, &short_table), InvalidArgument);
}

TEST(Simulate, InitialLaws) {
  const InitialLaw fixed = InitialLaw::fixed({1.0, 2.0});
  EXPECT_EQ(fixed.draw(0, 0, 4), (std::vector<double>{1.0, 2.0, 1.0, 2.0}));
  const InitialLaw normal = InitialLaw::normal(0.0, 1.0);
  const auto a = normal.draw(1, 2, 8), b = normal.draw(1, 2, 4);
  EXPECT_EQ(std::vector<double>(a.begin(), a.begin() + 4), b);
  const auto m = DiscreteMeasure::from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
  for (double x : InitialLaw::sampled_from(m).draw(3, 0, 20)) EXPECT_TRUE(x == -1.0 || x == 1.0);
  EXPECT_THROW(InitialLaw::normal(0.0, -1.0), InvalidArgument);
}

TEST(Simulate, BlowupIsReported) {
  const ModelSpec model = builtin_model("ou", "", {{"rate", -400.0}});
  SimConfig c;
  c.N = 2;
  c.M = 2;
  c.dt = 0.25;
  c.T = 10.0;
  const std::vector<double> times = {10.0};
  EXPECT_THROW(simulate_particle_system(c, model, InitialLaw::fixed({1.0}), 0, times), NumericalBlowup);
}
