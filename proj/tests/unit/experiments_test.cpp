#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mflab/errors.hpp"
#include "mflab/experiments.hpp"
#include "mflab/kernel_registry.hpp"

using namespace mflab;

namespace {

RateConfig small_config(const char* model = "ou_tanh") {
  RateConfig c;
  c.model = builtin_model(model);
  c.N_list = {4, 8};
  c.T = 0.5;
  c.dt = 1.0 / 16;
  c.M = 16;
  c.replications = 64;
  c.pilot_replications = 64;
  c.seed = 3;
  c.threads = 1;
  return c;
}

std::string csv(const RateReport& r) {
  std::ostringstream s;
  write_rate_csv(s, r);
  return s.str();
}

}  // namespace

TEST(Report, SummarizeUsesSignalDominatedRows) {
  RateReport r;
  for (double n : {64.0, 128.0, 256.0, 512.0}) {
    const double e = 0.5 / std::sqrt(n);
    r.rows.push_back({static_cast<std::size_t>(n), e, e / 100.0, 0.0, false});
  }
  r.rows.push_back({1024, 1e-4, 1.0, 0.0, false});  // noise-dominated
  summarize(r);
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_NEAR(r.fit->slope, -0.5, 1e-6);
  EXPECT_EQ(r.fit->points, 4u);
  EXPECT_TRUE(r.rows[0].signal_dominated);
  EXPECT_FALSE(r.rows[4].signal_dominated);
  EXPECT_NEAR(r.rows[0].scaled_error, 0.5, 1e-12);
  EXPECT_NEAR(r.band_ratio, 0.5 / (1e-4 * std::sqrt(1024.0)), 1e-9);
}

TEST(Report, SinglePointHasNoSlope) {
  RateReport r;
  r.rows.push_back({100, 0.05, 0.001, 0.0, false});
  summarize(r);
  EXPECT_FALSE(r.fit.has_value());
  EXPECT_NEAR(r.rows[0].scaled_error, 0.5, 1e-12);
  EXPECT_EQ(r.band_ratio, 1.0);
}

TEST(Report, CsvAndNumberFormat) {
  RateReport r;
  r.rows.push_back({4, 0.1, 0.01, 0.2, true});
  EXPECT_EQ(csv(r), "N,weak_error,std_error,scaled_error\n4,0.1,0.01,0.2\n");
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    const std::string s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
}

TEST(RateExperiment, DeterministicAndThreadInvariant) {
  RateConfig c = small_config();
  const PolynomialFunctional phi = builtin_functional("tanh_mean");
  const RateReport a = rate_experiment(c, phi);
  const RateReport b = rate_experiment(c, phi);
  c.threads = 3;
  const RateReport d = rate_experiment(c, phi);
  EXPECT_EQ(csv(a), csv(b));
  EXPECT_EQ(csv(a), csv(d));
  EXPECT_EQ(rate_sidecar_json(a, c), rate_sidecar_json(d, c));
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(a.rows[0].N, 4u);
  EXPECT_EQ(a.M, 16u);
}

TEST(RateExperiment, CommonRandomNumbersReduceVariance) {
  RateConfig c = small_config();
  c.replications = 400;
  c.pilot_replications = 400;
  const PolynomialFunctional phi = builtin_functional("tanh_mean");
  const RateReport with = rate_experiment(c, phi);
  c.crn = false;
  const RateReport without = rate_experiment(c, phi);
  for (std::size_t i = 0; i < with.rows.size(); ++i)
    EXPECT_LT(with.rows[i].std_error, without.rows[i].std_error) << with.rows[i].N;
}

TEST(RateExperiment, ZeroNoiseModelHasOnlyTimeStepError) {
  RateConfig c = small_config("pure_drift");
  const RateReport r = rate_experiment(c, builtin_functional("tanh_mean"));
  for (const RateRow& row : r.rows) EXPECT_LT(std::abs(row.weak_error), c.dt) << row.N;
}

TEST(RateExperiment, DefaultReferenceCloud) {
  RateConfig c = small_config();
  c.M = 0;
  c.replications = 8;
  c.pilot_replications = 8;
  EXPECT_EQ(rate_experiment(c, builtin_functional("mean")).M, 16u * 8u);
}

TEST(RateExperiment, RejectsBadLadders) {
  RateConfig c = small_config();
  c.N_list = {8, 4};
  EXPECT_THROW(rate_experiment(c, builtin_functional("mean")), InvalidArgument);
  c.N_list = {4, 8};
  EXPECT_THROW(rate_experiment(c, builtin_functional("mean_squared")), InvalidArgument);
}

TEST(RateExperiment, UnderpoweredExperimentFailsLoudly) {
  // Independent particles: the weak error is pure time-step noise.
  RateConfig c = small_config("ou");
  c.N_list = {4, 64};
  c.M = 64;
  c.replications = 400;
  c.pilot_replications = 100;
  try {
    rate_experiment(c, builtin_functional("tanh_mean"));
    FAIL() << "expected an underpowered-experiment error";
  } catch (const UnderpoweredExperiment& e) {
    EXPECT_GT(e.required_replications(), c.replications);
  }
}

TEST(RateExperiment, MDoublingCheck) {
  RateConfig c = small_config();
  c.m_doubling_replications = 32;
  const RateReport r = rate_experiment(c, builtin_functional("tanh_mean"));
  ASSERT_TRUE(r.m_doubling.has_value());
  EXPECT_EQ(r.m_doubling->M, 16u);
  EXPECT_EQ(r.m_doubling->replications, 32u);
  EXPECT_GT(r.m_doubling->std_error, 0.0);
}

TEST(MultiTime, ConstantObservableHasNoError) {
  RateConfig c = small_config();
  const ObservableFactors f = {{builtin_functional("constant"), 0.25}, {builtin_functional("constant"), 0.5}};
  const RateReport r = multi_time_polynomial_experiment(c, f);
  for (const RateRow& row : r.rows) {
    EXPECT_EQ(row.weak_error, 0.0);
    EXPECT_EQ(row.std_error, 0.0);
  }
}

TEST(MultiTime, SingleFactorMatchesRateExperiment) {
  RateConfig c = small_config();
  const PolynomialFunctional mean = builtin_functional("mean");
  const RateReport a = rate_experiment(c, mean);
  const RateReport b = multi_time_polynomial_experiment(c, {{mean, c.T}});
  EXPECT_EQ(csv(a), csv(b));
}

TEST(MultiTime, RejectsTimeZeroAndLongProducts) {
  RateConfig c = small_config();
  const PolynomialFunctional mean = builtin_functional("mean");
  EXPECT_THROW(multi_time_polynomial_experiment(c, {{mean, 0.0}}), InvalidArgument);
  EXPECT_THROW(multi_time_polynomial_experiment(c, {{mean, 0.125}, {mean, 0.25}, {mean, 0.375}, {mean, 0.5}}),
               InvalidArgument);
}

TEST(Suites, RegistryAndVacuousPass) {
  EXPECT_THROW(run_suite("nope", {}), RegistryError);
  SuiteConfig c;
  c.instances = 0;
  for (const std::string& name : suite_names()) {
    const SuiteReport r = run_suite(name, c);
    EXPECT_TRUE(r.rows.empty()) << name;
    EXPECT_TRUE(r.pass()) << name;
    ASSERT_EQ(r.warnings.size(), 1u) << name;
  }
}

TEST(Suites, SmallInstancesPass) {
  SuiteConfig c;
  c.seed = 5;
  c.threads = 1;
  c.instances = 5;
  for (const char* name : {"derivative", "taylor", "metric", "generator"}) {
    const SuiteReport r = run_suite(name, c);
    EXPECT_FALSE(r.rows.empty()) << name;
    for (const SuiteRow& row : r.rows) EXPECT_TRUE(row.pass) << name << " " << row.instance << " " << row.property;
  }
}

TEST(Suites, CsvIsReproducible) {
  SuiteConfig c;
  c.seed = 9;
  c.instances = 3;
  std::ostringstream a, b;
  write_suite_csv(a, run_suite("metric", c));
  c.threads = 2;
  write_suite_csv(b, run_suite("metric", c));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("suite,instance,property,value,reference,tolerance,pass\n", 0), 0u);
}

TEST(Diagnostics, CsvFormat) {
  std::ostringstream s;
  write_diagnostic_csv(s, {{"dynkin_mean", 64, 0.5, 0.01, 0.02, 0.06, true}});
  EXPECT_EQ(s.str(), "diagnostic_id,N,t,value,std_error,bound,pass\ndynkin_mean,64,0.5,0.01,0.02,0.06,1\n");
}

TEST(Diagnostics, TrotterSeriesRunsIndependently) {
  const GeneratorContext ctx{builtin_model("ou_tanh"), Regime::Diffusive, {}};
  const auto e = DiscreteMeasure::empirical(std::vector<double>{-0.5, 0.0, 0.7, 1.2});
  DiagnosticResources res;
  res.dt = 1.0 / 32;
  res.seed = 4;
  res.threads = 1;
  TrotterBudget b;
  b.outer_replications = 100;
  b.design_points = 16;
  b.sub_replications = 2;
  const TrotterSeries s = trotter_series(builtin_functional("mean"), e, 4, 0.125, ctx, res, b, 2);
  ASSERT_EQ(s.runs.size(), 2u);
  EXPECT_NE(s.runs[0].seed, s.runs[1].seed);
  EXPECT_NE(s.runs[0].result.lhs, s.runs[1].result.lhs);
}
