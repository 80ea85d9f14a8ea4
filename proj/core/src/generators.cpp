#include "mflab/generators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

#include "mflab/common_noise.hpp"
#include "mflab/errors.hpp"
#include "mflab/kernel_registry.hpp"
#include "mflab/parallel.hpp"
#include "mflab/stats.hpp"

namespace mflab {

namespace {

// Coefficients at every atom of m.
struct AtomCoefficients {
  MeasureStats stats;
  std::vector<double> x, w, b, sigma, varsigma, f, h;
  bool varsigma_constant = true;
};

AtomCoefficients evaluate(const GeneratorContext& ctx, const DiscreteMeasure& m, bool particle) {
  const CoefficientSet& c = *ctx.model.coefficients;
  AtomCoefficients a;
  const std::size_t size = m.size();
  for (const Atom& atom : m.atoms()) {
    a.x.push_back(atom.position);
    a.w.push_back(atom.weight);
  }
  a.stats = c.stats(a.x, a.w);
  a.b.resize(size);
  a.sigma.resize(size);
  a.f.resize(size);
  a.h.resize(size);
  c.drift_batch(a.stats, a.x, a.b, a.sigma);
  c.intensity_batch(a.stats, a.x, a.f, a.h);
  a.varsigma.assign(size, 0.0);
  if (ctx.regime == Regime::General) {
    for (std::size_t i = 0; i < size; ++i) a.varsigma[i] = c.common_volatility(a.stats, a.x[i]);
  } else if (!particle) {
    // varsigma^2 = zeta^2 int h^2 f dm by construction
    a.varsigma.assign(size, c.zeta() * std::sqrt(a.stats.h2f));
  }
  for (double s : a.varsigma) a.varsigma_constant = a.varsigma_constant && s == a.varsigma.front();
  return a;
}

// int [b d_x dG + 1/2 (sigma^2 + varsigma^2) d_xx dG] dm
double drift_diffusion_term(const BoundFunctional& bf, const AtomCoefficients& a) {
  if (bf.arity() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    const double v = a.sigma[i] * a.sigma[i] + a.varsigma[i] * a.varsigma[i];
    double term = a.b[i] * bf.lions(a.x[i]);
    if (v != 0.0) term += 0.5 * v * bf.lions_dy(a.x[i]);
    total += a.w[i] * term;
  }
  return total;
}

// 1/2 int int d_xy delta^2 G varsigma(x) varsigma(y) dm dm
double common_cross_term(const BoundFunctional& bf, const AtomCoefficients& a) {
  if (bf.arity() < 2) return 0.0;
  if (a.varsigma_constant) {
    const double s = a.varsigma.front();
    return s == 0.0 ? 0.0 : 0.5 * s * s * bf.delta2_mixed_integral();
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i)
    for (std::size_t j = 0; j < a.x.size(); ++j)
      total += a.w[i] * a.w[j] * a.varsigma[i] * a.varsigma[j] * bf.delta2_mixed(a.x[i], a.x[j]);
  return 0.5 * total;
}

// 1/(2N) int (d_y1y2 delta^2 G)(x, x) sigma^2 dm
double diagonal_term(const BoundFunctional& bf, const AtomCoefficients& a, std::size_t n) {
  if (bf.arity() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i)
    if (a.sigma[i] != 0.0) total += a.w[i] * a.sigma[i] * a.sigma[i] * bf.delta2_mixed(a.x[i], a.x[i]);
  return total / (2.0 * static_cast<double>(n));
}

double limit_generator(const BoundFunctional& bf, const AtomCoefficients& a, const GeneratorContext& ctx) {
  double total = drift_diffusion_term(bf, a) + common_cross_term(bf, a);
  if (ctx.regime == Regime::General && bf.arity() > 0) {
    // f(m, x) [dG(m, x + h) - dG(m, x)]
    for (std::size_t i = 0; i < a.x.size(); ++i)
      if (a.f[i] != 0.0 && a.h[i] != 0.0)
        total += a.w[i] * a.f[i] * (bf.delta(a.x[i] + a.h[i]) - bf.delta(a.x[i]));
  }
  return total;
}

}  // namespace

double gen_limit(const PolynomialFunctional& g, const DiscreteMeasure& m, const GeneratorContext& ctx) {
  const BoundFunctional bf(g, m);
  return limit_generator(bf, evaluate(ctx, m, false), ctx);
}

double gen_limit_cloud(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t cloud_size,
                       const GeneratorContext& ctx) {
  if (cloud_size == 0) throw InvalidArgument("cloud size must be positive");
  const BoundFunctional bf(g, m);
  const AtomCoefficients a = evaluate(ctx, m, false);
  return limit_generator(bf, a, ctx) + diagonal_term(bf, a, cloud_size);
}

double gen_particle(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n,
                    const GeneratorContext& ctx) {
  if (n == 0) throw InvalidArgument("particle count must be positive");
  const JumpLaw& nu = ctx.model.nu;
  if (nu.nodes().empty()) throw Unsupported("jump law has neither finite support nor quadrature nodes");
  const BoundFunctional bf(g, m);
  const AtomCoefficients a = evaluate(ctx, m, true);
  double total = drift_diffusion_term(bf, a) + common_cross_term(bf, a) + diagonal_term(bf, a, n);
  if (bf.arity() == 0) return total;

  const double scale = ctx.regime == Regime::Diffusive ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
  const bool custom = ctx.regime == Regime::General && static_cast<bool>(ctx.particle_jump);
  // Shift amplitudes repeat whenever h does not depend on x; remember a few.
  std::vector<std::pair<double, double>> increments;
  auto increment = [&](double lambda) {
    for (const auto& [l, v] : increments)
      if (l == lambda) return v;
    const double v = bf.shift_increment(lambda);
    if (increments.size() < 16) increments.emplace_back(lambda, v);
    return v;
  };
  double jumps = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    if (a.f[i] == 0.0) continue;
    double inner = 0.0;
    for (const JumpAtom& u : nu.nodes()) {
      const double lambda = custom ? ctx.particle_jump(a.stats, a.x[i], u.value) : u.value * a.h[i] * scale;
      inner += u.probability * increment(lambda);
    }
    jumps += a.w[i] * a.f[i] * inner;
  }
  return total + static_cast<double>(n) * jumps;
}

double gen_diff(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, const GeneratorContext& ctx) {
  return gen_particle(g, m, n, ctx) - gen_limit(g, m, ctx);
}

// ------------------------------------------------------------------ Dynkin

namespace {

void require_simulable(const GeneratorContext& ctx) {
  if (ctx.regime != Regime::Diffusive) throw Unsupported("simulation covers the diffusive regime only");
  if (!ctx.model.nu.has_finite_support()) throw Unsupported("coupled simulation needs finite-support nu");
}

std::vector<double> empirical_positions(const DiscreteMeasure& m, std::size_t n) {
  if (!m.is_empirical_of_size(n))
    throw ContractViolation("the initial measure must be an empirical measure of " + std::to_string(n) + " points");
  return m.expand_empirical(n);
}

// One path of G(mu) - G(m) - int A G(mu_s) ds on the step grid.
class DynkinAccumulator {
 public:
  DynkinAccumulator(const PolynomialFunctional& g, std::function<double(const DiscreteMeasure&)> generator,
                    std::size_t last_step, double dt)
      : g_(g), generator_(std::move(generator)), last_(last_step), dt_(dt) {}

  void observe(std::size_t step, std::span<const double> x) {
    const DiscreteMeasure mu = DiscreteMeasure::empirical(x);
    const double a = generator_(mu);
    const double weight = (step == 0 || step == last_) ? 0.5 : 1.0;
    integral_ += weight * a * dt_;
    if (step == 0) start_ = eval(g_, mu);
    if (step == last_) end_ = eval(g_, mu);
  }
  double residual() const { return end_ - start_ - integral_; }

 private:
  const PolynomialFunctional& g_;
  std::function<double(const DiscreteMeasure&)> generator_;
  std::size_t last_;
  double dt_;
  double integral_ = 0.0, start_ = 0.0, end_ = 0.0;
};

}  // namespace

DynkinResult dynkin_residual(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, double t,
                             SystemKind which, const GeneratorContext& ctx, const DiagnosticResources& res) {
  if (t < 0.0) throw InvalidArgument("time must be non-negative");
  const std::vector<double> x0 = empirical_positions(m, n);
  DynkinResult out;
  if (t == 0.0) {
    out.pass = true;
    return out;
  }
  require_simulable(ctx);
  if (res.replications < 2) throw InvalidArgument("Dynkin residual needs at least two replications");
  const bool particle = which == SystemKind::Particle;
  const std::size_t size = particle ? n : n * res.cloud_factor;
  const std::vector<double> start = particle ? x0 : InitialLaw::fixed(x0).draw(res.seed, 0, size);

  std::vector<double> coarse(res.replications), fine(res.replications);
  parallel_for(res.replications, res.threads, [&](std::size_t rep) {
    CommonNoiseTree tree(ctx.model.nu, res.seed, rep);
    for (int level = 0; level < 2; ++level) {
      SimConfig cfg;
      cfg.N = size;
      cfg.M = size;
      cfg.dt = level == 0 ? res.dt : res.dt / 2;
      cfg.T = t;
      cfg.seed = res.seed;
      cfg.substeps = level == 0 ? 2 : 1;
      cfg.validate();
      const std::size_t steps = cfg.steps();
      std::vector<std::size_t> all(steps + 1);
      for (std::size_t k = 0; k <= steps; ++k) all[k] = k;
      auto generator = [&](const DiscreteMeasure& mu) {
        return particle ? gen_particle(g, mu, size, ctx) : gen_limit_cloud(g, mu, size, ctx);
      };
      DynkinAccumulator acc(g, generator, steps, cfg.dt);
      auto observer = [&](std::size_t step, double, std::span<const double> x) { acc.observe(step, x); };
      if (particle) {
        CoupledJumpSource jumps(tree, size);
        run_particle_system(cfg, ctx.model, start, rep, jumps, all, observer);
      } else {
        CoupledBrownian common(tree);
        run_limit_process(cfg, ctx.model, start, rep, common, all, observer);
      }
      (level == 0 ? coarse : fine)[rep] = acc.residual();
    }
  });
  std::vector<double> diff(res.replications);
  for (std::size_t r = 0; r < res.replications; ++r) diff[r] = coarse[r] - fine[r];
  const MeanEstimate rc = mean_and_std_error(coarse);
  out.residual = rc.mean;
  out.std_error = rc.std_error;
  out.residual_half = mean_and_std_error(fine).mean;
  // Euler is weak order one: the bias at dt is sum_k D / 2^k = 2 D.
  out.bias_budget = 2.0 * std::abs(mean_and_std_error(diff).mean);
  out.bound = 3.0 * out.std_error + out.bias_budget;
  out.pass = std::abs(out.residual) <= out.bound;
  return out;
}

// ------------------------------------------------------------------ Trotter

bool TrotterResult::agree() const {
  return std::abs(lhs - rhs) <= 3.0 * std::hypot(lhs_std_error, rhs_std_error);
}

namespace {

constexpr std::size_t kFeatures = 4;

const std::vector<PolynomialFunctional>& regression_features() {
  static const std::vector<PolynomialFunctional> features = {
      builtin_functional("constant"), builtin_functional("mean"), builtin_functional("second_moment"),
      builtin_functional("mean_squared")};
  return features;
}

std::array<double, kFeatures> feature_values(const DiscreteMeasure& mu) {
  const double mean = moment(mu, 1);
  return {1.0, mean, moment(mu, 2), mean * mean};
}

// Key streams of distinct diagnostic phases apart.
constexpr std::uint64_t kOuterStream = 1;
constexpr std::uint64_t kDesignStream = 2;

}  // namespace

TrotterResult trotter_gap(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, double t,
                          const GeneratorContext& ctx, const DiagnosticResources& res, const TrotterBudget& budget) {
  if (t < 0.0) throw InvalidArgument("time must be non-negative");
  const std::vector<double> x0 = empirical_positions(m, n);
  TrotterResult out;
  if (t == 0.0) return out;
  require_simulable(ctx);
  if (budget.outer_replications < 2 || budget.grid < 2 || budget.design_points <= kFeatures ||
      budget.sub_replications < 1)
    throw InvalidArgument("trotter budget too small");
  const std::size_t cloud = n * res.cloud_factor;
  const std::size_t grid = budget.grid;
  const double h = t / static_cast<double>(grid);
  const double steps_per_cell = h / res.dt;
  if (std::abs(steps_per_cell - std::round(steps_per_cell)) > 1e-9 || std::round(steps_per_cell) < 1)
    throw InvalidArgument("t / grid must be a whole number of steps");
  const auto cell = static_cast<std::size_t>(std::llround(steps_per_cell));
  const std::size_t total_steps = cell * grid;
  {
    // Limit particle-steps: the lhs clouds plus the regression sub-runs.
    double work = static_cast<double>(budget.outer_replications) * static_cast<double>(cloud * total_steps);
    for (std::size_t k = 1; k <= grid; ++k)
      work += static_cast<double>(budget.design_points * budget.sub_replications * cloud * cell * k);
    if (work > static_cast<double>(budget.max_limit_steps))
      throw BudgetExceeded("trotter diagnostic needs " + std::to_string(static_cast<std::uint64_t>(work)) +
                           " limit particle-steps, budget " + std::to_string(budget.max_limit_steps));
  }

  auto config = [&](std::size_t size, std::size_t steps, std::uint64_t seed) {
    SimConfig cfg;
    cfg.N = size;
    cfg.M = size;
    cfg.dt = res.dt;
    cfg.T = static_cast<double>(steps) * res.dt;
    cfg.seed = seed;
    return cfg;
  };

  // Left side: coupled pairs (limit cloud, particle system) from m.
  const std::vector<double> cloud_start = InitialLaw::fixed(x0).draw(res.seed, 0, cloud);
  std::vector<double> lhs(budget.outer_replications);
  parallel_for(budget.outer_replications, res.threads, [&](std::size_t rep) {
    CommonNoiseTree tree(ctx.model.nu, res.seed, rep);
    const std::vector<std::size_t> last{total_steps};
    double limit = 0.0, particles = 0.0;
    CoupledBrownian common(tree);
    run_limit_process(config(cloud, total_steps, res.seed), ctx.model, cloud_start, rep, common, last,
                      [&](std::size_t, double, std::span<const double> x) {
                        limit = eval(g, DiscreteMeasure::empirical(x));
                      });
    CoupledJumpSource jumps(tree, n);
    run_particle_system(config(n, total_steps, res.seed), ctx.model, x0, rep, jumps, last,
                        [&](std::size_t, double, std::span<const double> x) {
                          particles = eval(g, DiscreteMeasure::empirical(x));
                        });
    lhs[rep] = limit - particles;
  });
  const MeanEstimate l = mean_and_std_error(lhs);
  out.lhs = l.mean;
  out.lhs_std_error = l.std_error;

  // Outer particle paths observed at t - s_k = t - k h for k = 0..grid.
  const std::uint64_t outer_seed = hash_key(res.seed, kOuterStream);
  std::vector<std::size_t> observe(grid + 1);
  for (std::size_t k = 0; k <= grid; ++k) observe[k] = (grid - k) * cell;
  std::sort(observe.begin(), observe.end());
  const std::size_t outer = budget.outer_replications;
  // snapshots[rep][k]: mu^N at time t - s_k.
  std::vector<std::vector<std::vector<double>>> snapshots(outer, std::vector<std::vector<double>>(grid + 1));
  parallel_for(outer, res.threads, [&](std::size_t rep) {
    DirectJumpSource jumps(ctx.model.nu, Rng(outer_seed, rep, StreamRole::Jumps, n));
    run_particle_system(config(n, total_steps, outer_seed), ctx.model, x0, rep, jumps, observe,
                        [&](std::size_t step, double, std::span<const double> x) {
                          snapshots[rep][grid - step / cell].assign(x.begin(), x.end());
                        });
  });

  // Generator differences (A_bar - A^N) of G and of every feature, per path and grid point.
  const auto& features = regression_features();
  std::vector<std::vector<std::array<double, kFeatures + 1>>> gaps(outer,
                                                                   std::vector<std::array<double, kFeatures + 1>>(grid + 1));
  parallel_for(outer, res.threads, [&](std::size_t rep) {
    for (std::size_t k = 0; k <= grid; ++k) {
      const DiscreteMeasure mu = DiscreteMeasure::empirical(snapshots[rep][k]);
      auto& row = gaps[rep][k];
      row[0] = -gen_diff(g, mu, n, ctx);
      for (std::size_t i = 0; i < kFeatures; ++i) row[i + 1] = -gen_diff(features[i], mu, n, ctx);
    }
  });

  // Regression of P_bar_s G on the features, design drawn from the outer paths at t - s. At s = t
  // every path sits at m, so that design borrows the spread of the first grid time instead.
  const std::size_t design = std::min(budget.design_points, outer);
  const std::uint64_t design_seed = hash_key(res.seed, kDesignStream);
  std::vector<Eigen::Vector4d> beta(grid + 1, Eigen::Vector4d::Zero());
  std::vector<Eigen::Matrix4d> beta_cov(grid + 1, Eigen::Matrix4d::Zero());
  for (std::size_t k = 1; k <= grid; ++k) {
    std::vector<double> response(design);
    const std::size_t source = std::min(k, grid - 1);
    parallel_for(design, res.threads, [&](std::size_t d) {
      const std::vector<double> start = InitialLaw::fixed(snapshots[d][source]).draw(design_seed, 0, cloud);
      const std::size_t steps = cell * k;
      double sum = 0.0;
      for (std::size_t j = 0; j < budget.sub_replications; ++j) {
        const std::uint64_t rep = hash_key(k, d, j);
        DirectBrownian common(Rng(design_seed, rep, StreamRole::Common, 0));
        const std::vector<std::size_t> last{steps};
        run_limit_process(config(cloud, steps, design_seed), ctx.model, start, rep, common, last,
                          [&](std::size_t, double, std::span<const double> x) {
                            sum += eval(g, DiscreteMeasure::empirical(x));
                          });
      }
      response[d] = sum / static_cast<double>(budget.sub_replications);
    });
    Eigen::MatrixXd X(design, kFeatures);
    Eigen::VectorXd y(design);
    for (std::size_t d = 0; d < design; ++d) {
      const auto f = feature_values(DiscreteMeasure::empirical(snapshots[d][source]));
      for (std::size_t i = 0; i < kFeatures; ++i) X(d, i) = f[i];
      y(d) = response[d];
    }
    const auto qr = X.colPivHouseholderQr();
    beta[k] = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta[k];
    const double s2 = resid.squaredNorm() / static_cast<double>(design - kFeatures);
    const Eigen::Matrix4d gram = X.transpose() * X;
    beta_cov[k] = s2 * gram.completeOrthogonalDecomposition().pseudoInverse();
  }
  out.coefficients.resize(grid + 1);
  for (std::size_t k = 0; k <= grid; ++k) out.coefficients[k].assign(beta[k].data(), beta[k].data() + kFeatures);

  // Trapezoid in s; grid point 0 applies the generator gap to G itself.
  std::vector<double> weight(grid + 1, h);
  weight.front() = weight.back() = 0.5 * h;
  std::vector<double> per_path(outer);
  std::vector<Eigen::Vector4d> mean_gap(grid + 1, Eigen::Vector4d::Zero());
  for (std::size_t rep = 0; rep < outer; ++rep) {
    double total = weight[0] * gaps[rep][0][0];
    for (std::size_t k = 1; k <= grid; ++k) {
      Eigen::Vector4d d(gaps[rep][k][1], gaps[rep][k][2], gaps[rep][k][3], gaps[rep][k][4]);
      total += weight[k] * beta[k].dot(d);
      mean_gap[k] += d / static_cast<double>(outer);
    }
    per_path[rep] = total;
  }
  const MeanEstimate r = mean_and_std_error(per_path);
  double regression_var = 0.0;
  for (std::size_t k = 1; k <= grid; ++k)
    regression_var += weight[k] * weight[k] * mean_gap[k].dot(beta_cov[k] * mean_gap[k]);
  out.rhs = r.mean;
  out.rhs_std_error = std::sqrt(r.std_error * r.std_error + regression_var);
  return out;
}

}  // namespace mflab
