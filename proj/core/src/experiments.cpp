#include "mflab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <json.hpp>

#include "mflab/calculus_checks.hpp"
#include "mflab/common_noise.hpp"
#include "mflab/errors.hpp"
#include "mflab/kernel_registry.hpp"
#include "mflab/parallel.hpp"
#include "mflab/transport.hpp"

namespace mflab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ------------------------------------------------------------------ rates

namespace {

struct LadderPlan {
  std::size_t M = 0;
  std::vector<std::size_t> particle_steps;  // observation steps at dt
  std::vector<std::size_t> limit_steps;     // the same times at dt / 2
  // Single arity-one factor: both sides can average over the same N particles.
  bool first_n = false;
};

LadderPlan plan_ladder(const RateConfig& c, const ObservableFactors& factors) {
  if (c.N_list.empty()) throw InvalidArgument("N list is empty");
  if (!std::is_sorted(c.N_list.begin(), c.N_list.end()) ||
      std::adjacent_find(c.N_list.begin(), c.N_list.end()) != c.N_list.end())
    throw InvalidArgument("N list must be strictly increasing");
  if (c.N_list.front() < 1) throw InvalidArgument("N must be positive");
  if (factors.empty() || factors.size() > 3) throw InvalidArgument("between one and three observation factors");
  if (c.replications < 2) throw InvalidArgument("need at least two replications");
  if (c.crn && !c.model.nu.has_finite_support())
    throw Unsupported("common random numbers need a finite-support jump law");
  LadderPlan p;
  p.M = c.M == 0 ? 16 * c.N_list.back() : c.M;
  if (p.M < c.N_list.back()) throw InvalidArgument("M must be at least the largest N");
  std::vector<double> times;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const double t = factors[i].second;
    if (!(t > 0.0) || t > c.T) throw InvalidArgument("observation times must lie in (0, T]");
    if (i > 0 && !(t > factors[i - 1].second)) throw InvalidArgument("observation times must increase");
    times.push_back(t);
  }
  SimConfig probe;
  probe.dt = c.dt;
  probe.T = c.T;
  probe.validate();
  p.particle_steps = observation_steps(times, c.dt, c.T);
  p.limit_steps = observation_steps(times, c.dt / 2, c.T);
  p.first_n = factors.size() == 1 && factors[0].first.arity() == 1;
  return p;
}

SimConfig particle_config(const RateConfig& c, std::size_t n, std::uint64_t seed, unsigned substeps) {
  SimConfig s;
  s.N = n;
  s.M = n;
  s.dt = c.dt;
  s.T = c.T;
  s.seed = seed;
  s.substeps = substeps;
  return s;
}

SimConfig limit_config(const RateConfig& c, std::size_t m, std::uint64_t seed) {
  SimConfig s;
  s.N = m;
  s.M = m;
  s.dt = c.dt / 2;
  s.T = c.T;
  s.seed = seed;
  return s;
}

double product_of(const ObservableFactors& factors, const std::vector<std::vector<double>>& snaps, std::size_t count) {
  double v = 1.0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const std::span<const double> x(snaps[i].data(), count);
    v *= eval(factors[i].first, DiscreteMeasure::empirical(x));
  }
  return v;
}

// Positions at the observation steps, in factor order.
Observer snapshot_into(std::vector<std::vector<double>>& snaps, const std::vector<std::size_t>& steps) {
  return [&snaps, &steps](std::size_t step, double, std::span<const double> x) {
    const auto it = std::find(steps.begin(), steps.end(), step);
    snaps[static_cast<std::size_t>(it - steps.begin())].assign(x.begin(), x.end());
  };
}

constexpr std::uint64_t kIndependentStream = 0x1d;
constexpr std::uint64_t kDoublingStream = 0x2d;

// One replication of the ladder: diffs[i] for N_list[i], and the full-cloud reference.
void run_replication(const RateConfig& c, const ObservableFactors& factors, const LadderPlan& p, std::size_t rep,
                     std::vector<double>& diffs, double& reference) {
  const std::size_t n_max = c.N_list.back();
  std::vector<std::vector<double>> limit_snaps(factors.size()), snaps(factors.size());
  const std::vector<double> x0 = c.initial.draw(c.seed, rep, p.M);
  if (c.crn) {
    CommonNoiseTree tree(c.model.nu, c.seed, rep);
    NoiseTable table;
    table.particles = n_max;
    {
      CoupledBrownian common(tree);
      run_limit_process(limit_config(c, p.M, c.seed), c.model, x0, rep, common, p.limit_steps,
                        snapshot_into(limit_snaps, p.limit_steps), &table, 2);
    }
    reference = product_of(factors, limit_snaps, p.M);
    for (std::size_t i = 0; i < c.N_list.size(); ++i) {
      const std::size_t n = c.N_list[i];
      CoupledJumpSource jumps(tree, n);
      run_particle_system(particle_config(c, n, c.seed, 2), c.model, std::span<const double>(x0.data(), n), rep,
                          jumps, p.particle_steps, snapshot_into(snaps, p.particle_steps), {}, &table);
      const double limit = p.first_n ? product_of(factors, limit_snaps, n) : reference;
      diffs[i] = product_of(factors, snaps, n) - limit;
    }
  } else {
    DirectBrownian common(Rng(c.seed, rep, StreamRole::Common, 0));
    run_limit_process(limit_config(c, p.M, c.seed), c.model, x0, rep, common, p.limit_steps,
                      snapshot_into(limit_snaps, p.limit_steps));
    reference = product_of(factors, limit_snaps, p.M);
    for (std::size_t i = 0; i < c.N_list.size(); ++i) {
      const std::size_t n = c.N_list[i];
      const std::uint64_t seed = hash_key(c.seed, kIndependentStream, n);
      const std::vector<double> y0 = c.initial.draw(seed, rep, n);
      DirectJumpSource jumps(c.model.nu, Rng(seed, rep, StreamRole::Jumps, n));
      run_particle_system(particle_config(c, n, seed, 1), c.model, y0, rep, jumps, p.particle_steps,
                          snapshot_into(snaps, p.particle_steps));
      diffs[i] = product_of(factors, snaps, n) - reference;
    }
  }
}

struct LadderSamples {
  std::vector<std::vector<double>> diffs;  // [N index][rep]
  std::vector<double> reference;
};

void run_range(const RateConfig& c, const ObservableFactors& factors, const LadderPlan& p, std::size_t begin,
               std::size_t end, LadderSamples& out) {
  const std::size_t count = end - begin;
  std::vector<std::vector<double>> per_rep(count, std::vector<double>(c.N_list.size()));
  std::vector<double> refs(count);
  parallel_for(count, c.threads, [&](std::size_t k) { run_replication(c, factors, p, begin + k, per_rep[k], refs[k]); });
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t i = 0; i < c.N_list.size(); ++i) out.diffs[i].push_back(per_rep[k][i]);
    out.reference.push_back(refs[k]);
  }
}

void check_power(const RateConfig& c, const LadderSamples& pilot, std::size_t pilot_reps) {
  const MeanEstimate first = mean_and_std_error(pilot.diffs.front());
  const MeanEstimate last = mean_and_std_error(pilot.diffs.back());
  const double n0 = static_cast<double>(c.N_list.front());
  const double n1 = static_cast<double>(c.N_list.back());
  // Smallest expected error: the best-resolved row decayed at the N^{-1/2} rate.
  const double signal = std::max(std::abs(first.mean), 2.0 * first.std_error) * std::sqrt(n0 / n1);
  const double projected = last.std_error * std::sqrt(static_cast<double>(pilot_reps) / static_cast<double>(c.replications));
  if (signal > 3.0 * projected) return;
  const double ratio = 3.0 * last.std_error / signal;
  const auto required = static_cast<std::int64_t>(std::ceil(static_cast<double>(pilot_reps) * ratio * ratio));
  throw UnderpoweredExperiment("expected smallest weak error " + format_double(signal) + " is below three standard errors (" +
                                   format_double(3.0 * projected) + ") at " + std::to_string(c.replications) +
                                   " replications; about " + std::to_string(required) + " are needed",
                               required);
}

MDoublingCheck m_doubling(const RateConfig& c, const ObservableFactors& factors, const LadderPlan& p) {
  MDoublingCheck out;
  out.M = p.M;
  out.replications = c.m_doubling_replications;
  const std::uint64_t seed = hash_key(c.seed, kDoublingStream);
  std::vector<double> diff(c.m_doubling_replications);
  parallel_for(c.m_doubling_replications, c.threads, [&](std::size_t rep) {
    const std::vector<double> x0 = c.initial.draw(seed, rep, 2 * p.M);
    double value[2] = {0.0, 0.0};
    std::unique_ptr<CommonNoiseTree> tree;
    if (c.crn) tree = std::make_unique<CommonNoiseTree>(c.model.nu, seed, rep);
    for (int k = 0; k < 2; ++k) {
      const std::size_t m = (k + 1) * p.M;
      std::vector<std::vector<double>> snaps(factors.size());
      std::unique_ptr<BrownianSource> common;
      if (tree)
        common = std::make_unique<CoupledBrownian>(*tree);
      else
        common = std::make_unique<DirectBrownian>(Rng(seed, rep, StreamRole::Common, 0));
      run_limit_process(limit_config(c, m, seed), c.model, std::span<const double>(x0.data(), m), rep, *common,
                        p.limit_steps, snapshot_into(snaps, p.limit_steps));
      value[k] = product_of(factors, snaps, m);
    }
    diff[rep] = value[0] - value[1];
  });
  const MeanEstimate e = mean_and_std_error(diff);
  out.difference = e.mean;
  out.std_error = e.std_error;
  return out;
}

RateReport run_ladder(const RateConfig& c, const ObservableFactors& factors) {
  const LadderPlan plan = plan_ladder(c, factors);
  std::size_t pilot = c.pilot_replications;
  if (pilot == 0) pilot = std::min(c.replications, std::max<std::size_t>(200, c.replications / 10));
  pilot = std::min(pilot, c.replications);

  LadderSamples samples;
  samples.diffs.resize(c.N_list.size());
  run_range(c, factors, plan, 0, pilot, samples);
  if (pilot < c.replications) {
    check_power(c, samples, pilot);
    run_range(c, factors, plan, pilot, c.replications, samples);
  }

  RateReport report;
  report.M = plan.M;
  report.replications = c.replications;
  report.crn = c.crn;
  for (std::size_t i = 0; i < c.N_list.size(); ++i) {
    const MeanEstimate e = mean_and_std_error(samples.diffs[i]);
    RateRow row;
    row.N = c.N_list[i];
    row.weak_error = e.mean;
    row.std_error = e.std_error;
    report.rows.push_back(row);
  }
  const MeanEstimate ref = mean_and_std_error(samples.reference);
  report.reference = ref.mean;
  report.reference_std_error = ref.std_error;
  summarize(report);
  if (c.m_doubling_replications > 0) {
    if (c.m_doubling_replications < 2) throw InvalidArgument("M-doubling needs at least two replications");
    MDoublingCheck md = m_doubling(c, factors, plan);
    double smallest = std::numeric_limits<double>::infinity();
    for (const RateRow& r : report.rows) smallest = std::min(smallest, std::abs(r.weak_error));
    md.stable = 2.0 * std::abs(md.difference) <= 0.25 * smallest + 3.0 * 2.0 * md.std_error;
    report.m_doubling = md;
  }
  return report;
}

}  // namespace

void summarize(RateReport& report) {
  std::sort(report.rows.begin(), report.rows.end(), [](const RateRow& a, const RateRow& b) { return a.N < b.N; });
  report.scaled_max = 0.0;
  report.scaled_min = std::numeric_limits<double>::infinity();
  std::vector<double> xs, ys, ses;
  for (RateRow& r : report.rows) {
    r.scaled_error = r.weak_error * std::sqrt(static_cast<double>(r.N));
    r.signal_dominated = r.std_error < std::abs(r.weak_error) / 3.0;
    report.scaled_max = std::max(report.scaled_max, std::abs(r.scaled_error));
    report.scaled_min = std::min(report.scaled_min, std::abs(r.scaled_error));
    if (r.signal_dominated) {
      xs.push_back(static_cast<double>(r.N));
      ys.push_back(r.weak_error);
      ses.push_back(r.std_error);
    }
  }
  if (report.rows.empty()) report.scaled_min = 0.0;
  report.band_ratio = report.scaled_min > 0.0 ? report.scaled_max / report.scaled_min
                                              : std::numeric_limits<double>::infinity();
  report.fit.reset();
  if (xs.size() >= 2) {
    const bool weighted = std::all_of(ses.begin(), ses.end(), [](double s) { return s > 0.0; });
    report.fit = weighted ? fit_log_log(xs, ys, ses) : fit_log_log(xs, ys);
  }
}

RateReport rate_experiment(const RateConfig& config, const PolynomialFunctional& phi) {
  if (phi.arity() != 1) throw InvalidArgument("a test function is an arity-one functional");
  return run_ladder(config, {{phi, config.T}});
}

RateReport multi_time_polynomial_experiment(const RateConfig& config, const ObservableFactors& factors) {
  return run_ladder(config, factors);
}

void write_rate_csv(std::ostream& out, const RateReport& report) {
  out << "N,weak_error,std_error,scaled_error\n";
  for (const RateRow& r : report.rows)
    out << r.N << ',' << format_double(r.weak_error) << ',' << format_double(r.std_error) << ','
        << format_double(r.scaled_error) << '\n';
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string rate_sidecar_json(const RateReport& report, const RateConfig& config) {
  nlohmann::ordered_json j;
  if (report.fit) {
    j["fit"] = {{"slope", report.fit->slope},
                {"intercept", report.fit->intercept},
                {"slope_std_error", report.fit->slope_std_error},
                {"ci_low", report.fit->ci_low},
                {"ci_high", report.fit->ci_high},
                {"points", report.fit->points}};
  } else {
    j["fit"] = nullptr;
  }
  j["band"] = {{"scaled_max", finite_or_null(report.scaled_max)},
               {"scaled_min", finite_or_null(report.scaled_min)},
               {"ratio", finite_or_null(report.band_ratio)}};
  j["reference"] = {{"value", report.reference}, {"std_error", report.reference_std_error}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const RateRow& r : report.rows) rows.push_back({{"N", r.N}, {"signal_dominated", r.signal_dominated}});
  j["rows"] = rows;
  if (report.m_doubling) {
    const MDoublingCheck& m = *report.m_doubling;
    j["m_doubling"] = {{"M", m.M},
                       {"replications", m.replications},
                       {"difference", m.difference},
                       {"std_error", m.std_error},
                       {"stable", m.stable}};
  }
  j["config"] = {{"model", config.model.name},
                 {"nu", config.model.nu.name()},
                 {"N", config.N_list},
                 {"T", config.T},
                 {"dt", config.dt},
                 {"limit_dt", config.dt / 2},
                 {"M", report.M},
                 {"replications", config.replications},
                 {"seed", config.seed},
                 {"crn", config.crn}};
  return j.dump(2) + "\n";
}

// ------------------------------------------------------------------ suites

bool SuiteReport::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const SuiteRow& r) { return r.pass; });
}

void write_suite_csv(std::ostream& out, const SuiteReport& report) {
  out << "suite,instance,property,value,reference,tolerance,pass\n";
  for (const SuiteRow& r : report.rows)
    out << r.suite << ',' << r.instance << ',' << r.property << ',' << format_double(r.value) << ','
        << format_double(r.reference) << ',' << format_double(r.tolerance) << ',' << (r.pass ? 1 : 0) << '\n';
}

void write_diagnostic_csv(std::ostream& out, const std::vector<DiagnosticRow>& rows) {
  out << "diagnostic_id,N,t,value,std_error,bound,pass\n";
  for (const DiagnosticRow& r : rows)
    out << r.diagnostic_id << ',' << r.N << ',' << format_double(r.t) << ',' << format_double(r.value) << ','
        << format_double(r.std_error) << ',' << format_double(r.bound) << ',' << (r.pass ? 1 : 0) << '\n';
}

bool TrotterSeries::pass() const {
  return std::all_of(runs.begin(), runs.end(), [](const TrotterRun& r) { return r.agree(); });
}

TrotterSeries trotter_series(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, double t,
                             const GeneratorContext& ctx, const DiagnosticResources& res,
                             const TrotterBudget& budget, std::size_t runs) {
  TrotterSeries series;
  for (std::size_t k = 0; k < runs; ++k) {
    DiagnosticResources r = res;
    r.seed = hash_key(res.seed, 0x7e, k);
    series.runs.push_back({r.seed, trotter_gap(g, m, n, t, ctx, r, budget), std::nullopt});
  }
  const auto failed = std::count_if(series.runs.begin(), series.runs.end(),
                                    [](const TrotterRun& run) { return !run.result.agree(); });
  if (failed != 1) return series;
  for (TrotterRun& run : series.runs) {
    if (run.result.agree()) continue;
    DiagnosticResources r = res;
    r.seed = hash_key(run.seed, 0x7f);
    TrotterBudget doubled = budget;
    doubled.outer_replications *= 2;
    doubled.design_points *= 2;
    run.retry = trotter_gap(g, m, n, t, ctx, r, doubled);
  }
  return series;
}

namespace {

DiscreteMeasure random_measure(Rng& rng, std::size_t max_atoms, double spread, double center = 0.0) {
  const std::size_t k = 1 + rng.below(max_atoms);
  std::vector<Atom> atoms;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 0.1 + rng.uniform();
    atoms.push_back({center + spread * rng.normal(), w});
    total += w;
  }
  for (Atom& a : atoms) a.weight /= total;
  return DiscreteMeasure::from_atoms(std::move(atoms));
}

// Functionals whose derivative bounds are finite, so inequalities are not vacuous.
const std::vector<std::string>& bounded_ids() {
  static const std::vector<std::string> ids = {"sin_mean",         "cos_mean",         "tanh_mean",
                                               "sin_mean_squared", "tanh_mean_cubed",  "sin_cos_mixed",
                                               "bounded_cubic"};
  return ids;
}

class SuiteBuilder {
 public:
  explicit SuiteBuilder(std::string name) { report_.name = std::move(name); }
  void add(std::size_t instance, std::string property, double value, double reference, double tolerance, bool pass) {
    report_.rows.push_back({report_.name, instance, std::move(property), value, reference, tolerance, pass});
  }
  // |value - reference| <= tolerance
  void close(std::size_t instance, std::string property, double value, double reference, double tolerance) {
    add(instance, std::move(property), value, reference, tolerance, std::abs(value - reference) <= tolerance);
  }
  void inequality(std::size_t instance, std::string property, const InequalityCheck& c) {
    add(instance, std::move(property), c.lhs, c.rhs, c.noise, c.holds());
  }
  SuiteReport take() { return std::move(report_); }
  SuiteReport& report() { return report_; }

 private:
  SuiteReport report_;
};

SuiteReport derivative_suite(const SuiteConfig& c, std::size_t count) {
  SuiteBuilder s("derivative");
  Rng rng(hash_key(c.seed, 0xde));
  const auto ids = builtin_functional_ids();
  const double etas[3] = {1e-2, 1e-3, 1e-4};
  for (std::size_t i = 0; i < count; ++i) {
    const PolynomialFunctional g = builtin_functional(ids[rng.below(ids.size())]);
    const DiscreteMeasure m = random_measure(rng, 6, 1.0);
    const double x = 1.5 * rng.normal();
    const double d = delta(g, m, x);
    double err[3];
    for (int k = 0; k < 3; ++k) err[k] = std::abs(directional_fd(g, m, x, etas[k]) - d);
    const double scale = 1.0 + std::abs(d);
    if (*std::max_element(err, err + 3) <= 1e-10 * scale) {
      // No second-order term: the difference quotient is exact.
      s.add(i, "fd_exact", err[2], 0.0, 1e-10 * scale, true);
    } else {
      const SlopeFit fit = fit_log_log(etas, err);
      s.add(i, "fd_order", fit.slope, 1.0, 0.1, fit.slope >= 0.9);
    }
    const BoundFunctional bf(g, m);
    double magnitude = 0.0;
    for (const Atom& a : m.atoms()) magnitude += a.weight * std::abs(bf.delta(a.position));
    s.close(i, "centering", centering_defect(g, m), 0.0, 1e-10 * std::max(1.0, magnitude));
    const double y = 1.5 * rng.normal();
    const RoutePair routes = mixed_derivative_routes(g, m, x, y);
    s.close(i, "mixed_derivative_symmetry", routes.first, routes.second, 1e-9 * (1.0 + std::abs(routes.first)));
  }
  return s.take();
}

SuiteReport taylor_suite(const SuiteConfig& c, std::size_t count) {
  SuiteBuilder s("taylor");
  Rng rng(hash_key(c.seed, 0x7a));
  const auto& ids = bounded_ids();
  for (std::size_t i = 0; i < count; ++i) {
    const PolynomialFunctional g = builtin_functional(ids[rng.below(ids.size())]);
    const DiscreteMeasure m0 = random_measure(rng, 4, 1.0);
    // Mix near and far pairs so both regimes of the bound are exercised.
    const double spread = rng.uniform() < 0.5 ? 0.1 : 1.0;
    const DiscreteMeasure m1 = random_measure(rng, 4, spread, m0.mean());
    s.inequality(i, "taylor_order1", taylor_check(g, m0, m1, 1));
    s.inequality(i, "taylor_order2", taylor_check(g, m0, m1, 2));
    s.inequality(i, "mean_value", mean_value_check(g, m0, m1));
  }
  return s.take();
}

SuiteReport metric_suite(const SuiteConfig& c, std::size_t pairs, std::size_t inequalities) {
  SuiteBuilder s("metric");
  Rng rng(hash_key(c.seed, 0x3e));
  for (std::size_t i = 0; i < pairs; ++i) {
    const DiscreteMeasure a = random_measure(rng, 8, 1.0);
    const DiscreteMeasure b = random_measure(rng, 8, 1.0, rng.normal());
    const DiscreteMeasure e = random_measure(rng, 8, 1.0);
    const double d = dkr(a, b);
    s.close(i, "dkr_vs_lp", d, dkr_lp_oracle(a, b), 1e-9);
    s.add(i, "triangle", d, dkr(a, e) + dkr(e, b), 1e-9, d <= dkr(a, e) + dkr(e, b) + 1e-9);
    const double lambda = rng.normal();
    s.close(i, "shift_isometry", dkr(shift(a, lambda), a), std::abs(lambda), 1e-9 * (1.0 + std::abs(lambda)));
    const double h1 = rng.normal(), h2 = rng.normal();
    const double lhs = dkr(shift(a, h1), shift(b, h2));
    s.add(i, "shifted_pair", lhs, d + std::abs(h1 - h2), 1e-9, lhs <= d + std::abs(h1 - h2) + 1e-9);
    const double t = rng.uniform();
    const double mixed = dkr(mix(a, b, t), a);
    s.add(i, "mix_contraction", mixed, 2.0 * t * d, 1e-9, mixed <= 2.0 * t * d + 1e-9);
  }
  const auto& ids = bounded_ids();
  for (std::size_t i = 0; i < inequalities; ++i) {
    const PolynomialFunctional g = builtin_functional(ids[rng.below(ids.size())]);
    const DiscreteMeasure m0 = random_measure(rng, 5, 1.0);
    const DiscreteMeasure m1 = random_measure(rng, 5, 1.0, 0.5 * rng.normal());
    s.inequality(i, "tensor_power_bound", kernel_integral_check(g.kernel(), m0, m1));
  }
  for (std::size_t i = 0; i < inequalities; ++i) {
    const std::size_t d = 2 + rng.below(2);
    std::vector<DiscreteMeasure> ms, mus;
    for (std::size_t k = 0; k < d; ++k) {
      ms.push_back(random_measure(rng, 3, 1.0));
      mus.push_back(random_measure(rng, 3, 1.0, 0.5 * rng.normal()));
    }
    s.inequality(i, "product_distance", product_distance_check(ms, mus));
  }
  return s.take();
}

std::vector<GeneratorContext> generator_contexts() {
  std::vector<GeneratorContext> out;
  for (const std::string& model : builtin_model_names())
    for (const char* nu : {"asymmetric", "rademacher", "gaussian"})
      out.push_back({builtin_model(model, nu), Regime::Diffusive, {}});
  return out;
}

SuiteReport generator_suite(const SuiteConfig& c, std::size_t count) {
  SuiteBuilder s("generator");
  Rng rng(hash_key(c.seed, 0x9e));
  const PolynomialFunctional quadratic = builtin_functional("mean_squared");
  const PolynomialFunctional constant = builtin_functional("constant");
  const auto ids = builtin_functional_ids();
  std::size_t instance = 0;
  for (const GeneratorContext& ctx : generator_contexts()) {
    for (std::size_t i = 0; i < count; ++i, ++instance) {
      const DiscreteMeasure m = random_measure(rng, 6, 1.0, rng.normal());
      const std::size_t n = 1 + rng.below(1000);
      // Quadratic exactness: the jump terms cancel and only (1/N) int sigma^2 dm remains.
      const MeasureStats st = ctx.model.coefficients->stats(m);
      double sigma2 = 0.0;
      for (const Atom& a : m.atoms()) {
        const double sg = ctx.model.coefficients->diffusion(st, a.position);
        sigma2 += a.weight * sg * sg;
      }
      const double expected = sigma2 / static_cast<double>(n);
      // Relative to the size of the two generators whose jump terms cancel.
      const double scale =
          std::abs(expected) + std::abs(gen_limit(quadratic, m, ctx)) + std::abs(gen_particle(quadratic, m, n, ctx));
      s.close(instance, "quadratic_exactness", gen_diff(quadratic, m, n, ctx), expected, 1e-10 * scale);
      s.close(instance, "constant_limit", gen_limit(constant, m, ctx), 0.0, 0.0);
      s.close(instance, "constant_particle", gen_particle(constant, m, n, ctx), 0.0, 0.0);
      // Linearity in G through a random combination.
      const PolynomialFunctional g1 = builtin_functional(ids[rng.below(ids.size())]);
      const PolynomialFunctional g2 = builtin_functional(ids[rng.below(ids.size())]);
      const double c1 = rng.normal(), c2 = rng.normal();
      const PolynomialFunctional gs[2] = {g1, g2};
      const double cs[2] = {c1, c2};
      const PolynomialFunctional combo = linear_combination(gs, cs);
      const double lhs_l = gen_limit(combo, m, ctx);
      const double rhs_l = c1 * gen_limit(g1, m, ctx) + c2 * gen_limit(g2, m, ctx);
      s.close(instance, "linearity_limit", lhs_l, rhs_l, 1e-9 * (1.0 + std::abs(rhs_l)));
      const double lhs_p = gen_particle(combo, m, n, ctx);
      const double rhs_p = c1 * gen_particle(g1, m, n, ctx) + c2 * gen_particle(g2, m, n, ctx);
      s.close(instance, "linearity_particle", lhs_p, rhs_p, 1e-9 * (1.0 + std::abs(rhs_p)));
    }
  }
  if (count == 0) return s.take();
  // Generator gap of a cubic functional across N.
  const PolynomialFunctional cubic = builtin_functional("mean_cubed");
  const std::size_t ns[4] = {100, 1000, 10000, 100000};
  for (const char* nu : {"asymmetric", "rademacher"}) {
    const GeneratorContext ctx{builtin_model("ou_tanh", nu), Regime::Diffusive, {}};
    for (std::size_t i = 0; i < 10; ++i, ++instance) {
      const DiscreteMeasure m = random_measure(rng, 6, 1.0, 1.0 + rng.uniform());
      double scaled[4];
      for (int k = 0; k < 4; ++k)
        scaled[k] = std::abs(gen_diff(cubic, m, ns[k], ctx)) * std::sqrt(static_cast<double>(ns[k]));
      const double hi = *std::max_element(scaled, scaled + 4), lo = *std::min_element(scaled, scaled + 4);
      if (std::string(nu) == "asymmetric") {
        s.add(instance, "cubic_gap_band", lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity(), 3.0, 0.0,
              lo > 0.0 && hi / lo <= 3.0);
      } else {
        const bool decreasing = scaled[1] < scaled[0] && scaled[2] < scaled[1] && scaled[3] < scaled[2];
        s.add(instance, "cubic_gap_decay", scaled[3] / scaled[0], 1.0, 0.0, decreasing);
      }
    }
  }
  return s.take();
}

SuiteReport dynkin_suite(const SuiteConfig& c) {
  SuiteBuilder s("dynkin");
  const GeneratorContext ctx{builtin_model("ou_tanh"), Regime::Diffusive, {}};
  Rng rng(hash_key(c.seed, 0xd1));
  std::vector<double> x(c.dynkin_particles);
  for (double& v : x) v = rng.normal();
  const DiscreteMeasure m = DiscreteMeasure::empirical(x);
  DiagnosticResources res;
  res.dt = c.dynkin_dt;
  res.replications = c.dynkin_replications;
  res.seed = c.seed;
  res.threads = c.threads;
  std::size_t i = 0;
  for (const char* id : {"mean", "second_moment", "mean_squared"}) {
    const DynkinResult r =
        dynkin_residual(builtin_functional(id), m, c.dynkin_particles, c.dynkin_time, SystemKind::Particle, ctx, res);
    s.add(i++, std::string("residual_") + id, r.residual, r.bound, r.std_error, r.pass);
  }
  return s.take();
}

}  // namespace

std::vector<std::string> suite_names() { return {"derivative", "taylor", "metric", "generator", "dynkin"}; }

SuiteReport run_suite(const std::string& name, const SuiteConfig& config) {
  const auto count = [&](std::size_t fallback) { return config.instances.value_or(fallback); };
  SuiteReport report;
  if (name == "derivative")
    report = derivative_suite(config, count(50));
  else if (name == "taylor")
    report = taylor_suite(config, count(1000));
  else if (name == "metric")
    report = metric_suite(config, count(500), count(200));
  else if (name == "generator")
    report = generator_suite(config, count(100));
  else if (name == "dynkin")
    report = count(1) == 0 ? SuiteReport{"dynkin", {}, {}} : dynkin_suite(config);
  else
    throw RegistryError("unknown suite \"" + name + "\"");
  if (report.rows.empty()) report.warnings.push_back("suite " + name + " ran no instances; vacuous pass");
  return report;
}

}  // namespace mflab
