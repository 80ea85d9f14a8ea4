#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mflab/functional.hpp"
#include "mflab/measure.hpp"
#include "mflab/model.hpp"
#include "mflab/simulate.hpp"

namespace mflab {

enum class Regime {
  // Limit: b, sigma, varsigma = common_volatility and jumps of size h(m, x)
  // at rate f. Particles: the same b, sigma, varsigma, and jumps of the
  // whole cloud by h(m, x, u), u ~ nu, at rate f per particle.
  General,
  // Particles jump the cloud by u h(m, x) / sqrt(N) and carry no common
  // Brownian term; the limit has no jumps and varsigma^2 = zeta^2 int h^2 f dm.
  Diffusive,
};

// Particle jump amplitude h(m, x, u) for the general regime.
using JumpAmplitude = std::function<double(const MeasureStats&, double x, double u)>;

struct GeneratorContext {
  ModelSpec model;
  Regime regime = Regime::Diffusive;
  // General regime only; empty means u h(m, x).
  JumpAmplitude particle_jump;
};

// Generator of the conditional law, evaluated exactly on a discrete measure.
double gen_limit(const PolynomialFunctional& g, const DiscreteMeasure& m, const GeneratorContext& ctx);
// Generator of the N-particle empirical measure. The jump term evaluates G
// on the shifted measure for every (atom, support point) pair; nu must have
// finite support.
double gen_particle(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n,
                    const GeneratorContext& ctx);
double gen_diff(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, const GeneratorContext& ctx);

// The generator of an M-particle conditional-law cloud: the limit generator
// plus the 1/(2M) diagonal term of independent idiosyncratic noise.
double gen_limit_cloud(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t cloud_size,
                       const GeneratorContext& ctx);

struct DiagnosticResources {
  double dt = 1.0 / 512;
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: all hardware threads
  // Limit-cloud size multiplier: the cloud has cloud_factor * |atoms| particles.
  std::size_t cloud_factor = 16;
};

struct DynkinResult {
  double residual = 0.0;  // at dt
  double std_error = 0.0;
  double residual_half = 0.0;  // at dt / 2, same noise
  double bias_budget = 0.0;
  double bound = 0.0;  // 3 std_error + bias_budget
  bool pass = false;
};

// E_m[G(mu_t)] - G(m) - int_0^t E_m[A G(mu_s)] ds with the time integral by
// the trapezoid rule on the step grid. The run is repeated at dt / 2 with the
// same Brownian paths and common noise; the bias budget is the first-order
// extrapolation 2 |R_dt - R_{dt/2}|. For the particle system m must be in
// E_N for n = number of atoms counted with multiplicity (n given). For the
// limit the cloud's own generator gen_limit_cloud is used.
DynkinResult dynkin_residual(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, double t,
                             SystemKind which, const GeneratorContext& ctx, const DiagnosticResources& res);

struct TrotterBudget {
  std::size_t outer_replications = 4000;  // for both sides of the identity
  std::size_t grid = 4;                   // intervals of the s-quadrature
  std::size_t design_points = 256;        // regression design per grid point
  std::size_t sub_replications = 8;       // limit runs per design point
  std::size_t max_limit_steps = 2'000'000'000;  // total limit particle-steps
};

struct TrotterResult {
  double lhs = 0.0;  // P_bar_t G(m) - P^N_t G(m)
  double lhs_std_error = 0.0;
  double rhs = 0.0;  // int_0^t P^N_{t-s} (A_bar - A^N) P_bar_s G(m) ds
  double rhs_std_error = 0.0;
  // Regression coefficients of P_bar_s G on (1, mean, second moment, mean^2), per grid point.
  std::vector<std::vector<double>> coefficients;
  bool agree() const;
};

// m must be in E_N (n atoms with multiplicity). P_bar_s G is estimated by
// regressing sub-replication averages of G on the features above; the
// estimate is then a polynomial functional to which A_bar - A^N applies.
// Throws BudgetExceeded when the limit simulations would exceed the budget.
TrotterResult trotter_gap(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, double t,
                          const GeneratorContext& ctx, const DiagnosticResources& res, const TrotterBudget& budget);

}  // namespace mflab
