#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mflab/functional.hpp"
#include "mflab/generators.hpp"
#include "mflab/model.hpp"
#include "mflab/simulate.hpp"
#include "mflab/stats.hpp"

namespace mflab {

struct RateRow {
  std::size_t N = 0;
  double weak_error = 0.0;
  double std_error = 0.0;
  double scaled_error = 0.0;  // weak_error * sqrt(N)
  bool signal_dominated = false;  // std_error < |weak_error| / 3
};

// Stability of the reference under doubling the limit cloud: the mean of
// G(cloud of M) - G(cloud of 2M) over paired runs sharing the common noise.
struct MDoublingCheck {
  std::size_t M = 0;
  std::size_t replications = 0;
  double difference = 0.0;
  double std_error = 0.0;
  // With a 1/M bias the reference is off by about 2 |difference|; stable
  // when that is at most a quarter of the smallest weak error, up to 3 SE.
  bool stable = false;
};

struct RateReport {
  std::vector<RateRow> rows;  // sorted by N
  std::optional<SlopeFit> fit;  // from signal-dominated rows, when there are two or more
  double scaled_max = 0.0;  // of |weak_error| sqrt(N)
  double scaled_min = 0.0;
  double band_ratio = 0.0;  // scaled_max / scaled_min
  double reference = 0.0;  // E of the observable under the limit, full cloud
  double reference_std_error = 0.0;
  std::size_t M = 0;
  std::size_t replications = 0;
  bool crn = true;
  std::optional<MDoublingCheck> m_doubling;
};

struct RateConfig {
  ModelSpec model;
  InitialLaw initial = InitialLaw::normal(0.0, 1.0);
  std::vector<std::size_t> N_list;
  double T = 1.0;
  double dt = 1.0 / 1024;  // particle step; the limit runs at dt / 2
  std::size_t M = 0;       // 0: 16 max(N_list)
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  // Common random numbers: the limit cloud and every N-system of a
  // replication share initial positions, idiosyncratic Brownian paths and
  // the common-noise tree. Off: all systems independent.
  bool crn = true;
  // Replications used to check the power before the full run; 0 picks
  // min(replications, max(200, replications / 10)), and replications itself
  // disables the separate check.
  std::size_t pilot_replications = 0;
  // Paired M / 2M reference runs; 0 skips the check.
  std::size_t m_doubling_replications = 0;
};

// Observable: a product of polynomial functionals at observation times,
// prod_i G_i(mu_{t_i}); the weak error is E over the N-system minus E over
// the limit.
using ObservableFactors = std::vector<std::pair<PolynomialFunctional, double>>;

// E[phi(Y^{N,1}_T)] - E[phi(Y_bar_T)] for phi given as the arity-one
// functional integral of phi dm (exchangeability turns the first particle
// into the empirical average).
RateReport rate_experiment(const RateConfig& config, const PolynomialFunctional& phi);
// Products of up to three functionals at increasing times in (0, T].
RateReport multi_time_polynomial_experiment(const RateConfig& config, const ObservableFactors& factors);

// Fills rows-derived fields (scaled errors, band, fit) from rows.
void summarize(RateReport& report);

// CSV: N,weak_error,std_error,scaled_error
void write_rate_csv(std::ostream& out, const RateReport& report);
// Fit results, band and the run configuration.
std::string rate_sidecar_json(const RateReport& report, const RateConfig& config);

// Independent Trotter runs with seeds derived from res.seed. When exactly
// one run disagrees it is repeated once with doubled outer replications and
// design points on a fresh seed; two or more disagreements fail outright.
struct TrotterRun {
  std::uint64_t seed = 0;
  TrotterResult result;
  std::optional<TrotterResult> retry;  // set when the run was repeated
  bool agree() const { return retry ? retry->agree() : result.agree(); }
};

struct TrotterSeries {
  std::vector<TrotterRun> runs;
  bool pass() const;
};

TrotterSeries trotter_series(const PolynomialFunctional& g, const DiscreteMeasure& m, std::size_t n, double t,
                             const GeneratorContext& ctx, const DiagnosticResources& res,
                             const TrotterBudget& budget, std::size_t runs);

// ------------------------------------------------------------------ suites

struct SuiteRow {
  std::string suite;
  std::size_t instance = 0;
  std::string property;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  // Number of random instances; empty uses each suite's default.
  std::optional<std::size_t> instances;
  // dynkin suite
  std::size_t dynkin_particles = 64;
  double dynkin_time = 0.5;
  double dynkin_dt = 1.0 / 512;
  std::size_t dynkin_replications = 10000;
};

struct SuiteReport {
  std::string name;
  std::vector<SuiteRow> rows;
  std::vector<std::string> warnings;
  bool pass() const;
};

// "derivative", "taylor", "metric", "generator", "dynkin".
SuiteReport run_suite(const std::string& name, const SuiteConfig& config);
std::vector<std::string> suite_names();

// CSV: suite,instance,property,value,reference,tolerance,pass
void write_suite_csv(std::ostream& out, const SuiteReport& report);

// CSV row for generator diagnostics: diagnostic_id,N,t,value,std_error,bound,pass
struct DiagnosticRow {
  std::string diagnostic_id;
  std::size_t N = 0;
  double t = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};
void write_diagnostic_csv(std::ostream& out, const std::vector<DiagnosticRow>& rows);

// Shortest round-trip decimal form, used by every CSV writer.
std::string format_double(double v);

}  // namespace mflab
