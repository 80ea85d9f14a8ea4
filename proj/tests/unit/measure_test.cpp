#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mflab/errors.hpp"
#include "mflab/measure.hpp"
#include "mflab/rng.hpp"
#include "mflab/stats.hpp"
#include "mflab/transport.hpp"

using namespace mflab;

namespace {

DiscreteMeasure random_measure(Rng& rng, std::size_t atoms, double center = 0.0) {
  std::vector<Atom> a;
  double total = 0.0;
  for (std::size_t i = 0; i < atoms; ++i) {
    a.push_back({center + rng.normal(), 0.1 + rng.uniform()});
    total += a.back().weight;
  }
  for (Atom& x : a) x.weight /= total;
  return DiscreteMeasure::from_atoms(a);
}

// Every vertex of the 2 x 2 transport polytope is one value of p11.
double two_by_two_oracle(const double s[2], const double d[2], const double c[4]) {
  const double lo = std::max(0.0, s[0] - d[1]), hi = std::min(s[0], d[0]);
  auto cost = [&](double p11) {
    const double p12 = s[0] - p11, p21 = d[0] - p11, p22 = s[1] - p21;
    return c[0] * p11 + c[1] * p12 + c[2] * p21 + c[3] * p22;
  };
  return std::min(cost(lo), cost(hi));
}

}  // namespace

TEST(DiscreteMeasure, SortsAndMergesAtoms) {
  const auto m = DiscreteMeasure::from_atoms({{1.0, 0.25}, {-1.0, 0.5}, {1.0, 0.25}});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.atoms()[0], (Atom{-1.0, 0.5}));
  EXPECT_EQ(m.atoms()[1], (Atom{1.0, 0.5}));
  EXPECT_DOUBLE_EQ(m.mean(), 0.0);
}

TEST(DiscreteMeasure, RejectsInvalidAtoms) {
  EXPECT_THROW(DiscreteMeasure::from_atoms({}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure::from_atoms({{0.0, 0.5}}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure::from_atoms({{0.0, -0.5}, {1.0, 1.5}}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure::from_atoms({{NAN, 1.0}}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure::empirical(std::vector<double>{}), InvalidArgument);
}

TEST(DiscreteMeasure, EmpiricalRoundTrip) {
  const std::vector<double> x = {0.5, -1.0, 0.5, 2.0};
  const auto m = DiscreteMeasure::empirical(x);
  EXPECT_TRUE(m.is_empirical_of_size(4));
  EXPECT_TRUE(m.is_empirical_of_size(8));
  EXPECT_FALSE(m.is_empirical_of_size(3));
  auto back = m.expand_empirical(4);
  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(back, sorted);
  EXPECT_THROW(m.expand_empirical(3), InvalidArgument);
}

TEST(DiscreteMeasure, JsonRoundTrip) {
  Rng rng(1);
  const auto m = random_measure(rng, 5);
  EXPECT_EQ(measure_from_json(to_json(m)), m);
  EXPECT_THROW(measure_from_json(R"({"atoms": [[0, 1]], "extra": 1})"), InvalidArgument);
  EXPECT_THROW(measure_from_json(R"({"atoms": [[0]]})"), InvalidArgument);
  EXPECT_THROW(measure_from_json("not json"), InvalidArgument);
}

TEST(DiscreteMeasure, ShiftMixMoment) {
  const auto m = DiscreteMeasure::from_atoms({{0.0, 0.5}, {2.0, 0.5}});
  EXPECT_DOUBLE_EQ(shift(m, 1.5).mean(), 2.5);
  EXPECT_DOUBLE_EQ(moment(m, 2), 2.0);
  EXPECT_DOUBLE_EQ(moment(m, 0), 1.0);
  const auto d = DiscreteMeasure::dirac(4.0);
  EXPECT_DOUBLE_EQ(mix(m, d, 0.25).mean(), 0.75 * 1.0 + 0.25 * 4.0);
  EXPECT_THROW(mix(m, d, 1.5), InvalidArgument);
  EXPECT_THROW(moment(m, -1), InvalidArgument);
}

TEST(Dkr, DiracsAndShifts) {
  EXPECT_DOUBLE_EQ(dkr(DiscreteMeasure::dirac(1.0), DiscreteMeasure::dirac(-2.5)), 3.5);
  Rng rng(2);
  const auto m = random_measure(rng, 6);
  EXPECT_NEAR(dkr(m, shift(m, 0.7)), 0.7, 1e-12);
  EXPECT_EQ(dkr(m, m), 0.0);
}

TEST(Dkr, AgreesWithTransportProgram) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_measure(rng, 1 + rng.below(8));
    const auto b = random_measure(rng, 1 + rng.below(8), rng.normal());
    EXPECT_NEAR(dkr(a, b), dkr_lp_oracle(a, b), 1e-9);
  }
}

TEST(Transport, TwoByTwoVertices) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double s0 = rng.uniform(), d0 = rng.uniform();
    const double s[2] = {s0, 1.0 - s0}, d[2] = {d0, 1.0 - d0};
    double c[4];
    for (double& v : c) v = 3.0 * rng.normal();  // negative costs allowed
    EXPECT_NEAR(optimal_transport_cost(s, d, c), two_by_two_oracle(s, d, c), 1e-12);
  }
}

TEST(Transport, RejectsBadInput) {
  const std::vector<double> s = {1.0}, d = {1.0}, c = {0.0, 1.0};
  EXPECT_THROW(optimal_transport_cost(s, d, c), InvalidArgument);
  std::vector<double> big(kMaxTransportAtoms, 1.0 / kMaxTransportAtoms);
  std::vector<double> cost(big.size(), 0.0);
  EXPECT_THROW(optimal_transport_cost(big, d, cost), SizeLimitExceeded);
}

TEST(Transport, ProductOfOneFactorIsDkr) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const DiscreteMeasure a[1] = {random_measure(rng, 4)};
    const DiscreteMeasure b[1] = {random_measure(rng, 5, 1.0)};
    EXPECT_NEAR(transport_distance_l1(product_measure(a), product_measure(b)), dkr(a[0], b[0]), 1e-9);
  }
}

TEST(Transport, ProductMeasureWeights) {
  Rng rng(6);
  const DiscreteMeasure f[2] = {random_measure(rng, 3), random_measure(rng, 2)};
  const auto p = product_measure(f);
  ASSERT_EQ(p.size(), 6u);
  double total = 0.0;
  for (const auto& a : p) {
    ASSERT_EQ(a.position.size(), 2u);
    total += a.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(TensorIntegrate, ExactAgainstMonteCarlo) {
  Rng rng(7);
  const auto m = random_measure(rng, 4);
  const TensorIntegrand phi = [](std::span<const double> x) { return std::sin(x[0]) * x[1] + x[2] * x[2]; };
  const double exact = tensor_integrate(m, 3, phi);
  const McEstimate mc = tensor_integrate_mc(m, 3, phi, 200000, 11);
  EXPECT_NEAR(mc.value, exact, 5.0 * mc.std_error);
}

TEST(TensorIntegrate, FactorizesForProducts) {
  Rng rng(8);
  const auto m = random_measure(rng, 5);
  const TensorIntegrand phi = [](std::span<const double> x) { return x[0] * x[1]; };
  EXPECT_NEAR(tensor_integrate(m, 2, phi), m.mean() * m.mean(), 1e-14);
  EXPECT_THROW(tensor_integrate(m, 12, phi, TensorBudget{1000}), BudgetExceeded);
}

TEST(TensorIntegrate, SignedSlots) {
  const auto m0 = DiscreteMeasure::from_atoms({{0.0, 0.5}, {1.0, 0.5}});
  const auto m1 = DiscreteMeasure::dirac(2.0);
  const SignedMeasure d = difference(m1, m0);
  const SignedMeasure* slots[2] = {&d, &d};
  const TensorIntegrand phi = [](std::span<const double> x) { return x[0] * x[1]; };
  // (integral of x d(m1 - m0))^2 = (2 - 0.5)^2
  EXPECT_NEAR(tensor_integrate(slots, phi), 2.25, 1e-14);
}

TEST(Stats, PairwiseSumIsExactOnIntegers) {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

TEST(Stats, MeanAndStdError) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const MeanEstimate e = mean_and_std_error(v);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(e.count, 4u);
}

TEST(Stats, SlopeFitRecoversSyntheticRate) {
  const std::vector<double> n = {64, 128, 256, 512, 1024};
  std::vector<double> y;
  for (double x : n) y.push_back(0.7 / std::sqrt(x));
  const SlopeFit f = fit_log_log(n, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-6);
  EXPECT_NEAR(std::exp(f.intercept), 0.7, 1e-6);
  std::vector<double> se(n.size(), 0.0);
  for (std::size_t i = 0; i < n.size(); ++i) se[i] = 0.01 * y[i];
  const SlopeFit w = fit_log_log(n, y, se);
  EXPECT_NEAR(w.slope, -0.5, 1e-6);
  EXPECT_LT(w.ci_low, -0.5);
  EXPECT_GT(w.ci_high, -0.5);
}

TEST(Stats, SlopeFitRejectsDegenerateInput) {
  const std::vector<double> one = {1.0};
  EXPECT_THROW(fit_log_log(one, one), InvalidArgument);
  const std::vector<double> x = {2.0, 2.0}, y = {1.0, 2.0};
  EXPECT_THROW(fit_log_log(x, y), InvalidArgument);
}

TEST(Stats, PoissonQuantileMatchesCdfSum) {
  for (double mean : {0.3, 4.0, 25.0, 120.0}) {
    for (double p : {1e-6, 0.1, 0.5, 0.9, 0.999999}) {
      // Smallest k with CDF(k) >= p by direct summation in log space.
      double cdf = 0.0;
      std::uint64_t k = 0;
      for (;; ++k) {
        cdf += std::exp(static_cast<double>(k) * std::log(mean) - mean - std::lgamma(static_cast<double>(k) + 1.0));
        if (cdf >= p) break;
      }
      const std::uint64_t q = poisson_quantile(mean, p);
      EXPECT_LE(q > k ? q - k : k - q, 1u) << "mean " << mean << " p " << p;
    }
  }
}
