#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "mflab/calculus_checks.hpp"
#include "mflab/errors.hpp"
#include "mflab/functional.hpp"
#include "mflab/kernel.hpp"
#include "mflab/kernel_registry.hpp"
#include "mflab/rng.hpp"

using namespace mflab;

namespace {

DiscreteMeasure random_measure(Rng& rng, std::size_t atoms, double spread = 1.0) {
  std::vector<Atom> a;
  double total = 0.0;
  for (std::size_t i = 0; i < atoms; ++i) {
    a.push_back({spread * rng.normal(), 0.1 + rng.uniform()});
    total += a.back().weight;
  }
  for (Atom& x : a) x.weight /= total;
  return DiscreteMeasure::from_atoms(a);
}

// The same kernel seen only through partial(): binding falls back to
// enumeration of atom tuples.
std::shared_ptr<const Kernel> opaque(const PolynomialFunctional& g) {
  auto base = g.kernel_ptr();
  std::map<std::vector<int>, double> sups;
  return std::make_shared<CallableKernel>(
      base->arity(), base->smoothness(),
      [base](std::span<const int> alpha, std::span<const double> x) { return base->partial(alpha, x); }, sups);
}

double central(const std::function<double(double)>& f, double x, double h = 1e-4) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST(Functional, ClosedFormsOfSimplePolynomials) {
  const auto m = DiscreteMeasure::from_atoms({{-1.0, 0.25}, {0.5, 0.5}, {3.0, 0.25}});
  const double mean = m.mean(), m2 = moment(m, 2);
  EXPECT_NEAR(eval(builtin_functional("mean"), m), mean, 1e-15);
  EXPECT_NEAR(eval(builtin_functional("second_moment"), m), m2, 1e-14);
  EXPECT_NEAR(eval(builtin_functional("mean_squared"), m), mean * mean, 1e-14);
  EXPECT_NEAR(eval(builtin_functional("mean_cubed"), m), mean * mean * mean, 1e-14);
  EXPECT_NEAR(eval(builtin_functional("constant"), m), 1.0, 1e-15);
}

TEST(Functional, CanonicalDerivativesOfMeanSquared) {
  const auto g = builtin_functional("mean_squared");
  Rng rng(1);
  const auto m = random_measure(rng, 5);
  const double a = m.mean();
  for (double y : {-2.0, 0.1, 1.7}) {
    EXPECT_NEAR(delta(g, m, y), 2.0 * a * (y - a), 1e-13);
    EXPECT_NEAR(lions(g, m, y), 2.0 * a, 1e-13);
    // delta of m -> 2a(y - a) = 2ay - 2a^2 in the direction z.
    for (double z : {-0.4, 2.2}) EXPECT_NEAR(delta2(g, m, y, z), 2.0 * (y - 2.0 * a) * (z - a), 1e-13);
  }
  const BoundFunctional bf(g, m);
  EXPECT_NEAR(bf.delta2_mixed(0.3, -0.9), 2.0, 1e-13);
  EXPECT_NEAR(bf.delta2_mixed_integral(), 2.0, 1e-13);
  EXPECT_NEAR(bf.lions_dy(0.3), 0.0, 1e-13);
}

TEST(Functional, DerivativeMatchesDirectionalDifference) {
  Rng rng(2);
  for (const std::string& id : builtin_functional_ids()) {
    const auto g = builtin_functional(id);
    const auto m = random_measure(rng, 4);
    const double x = rng.normal();
    // Richardson extrapolation removes the first-order term of the quotient.
    const double fd = 2.0 * directional_fd(g, m, x, 1e-4) - directional_fd(g, m, x, 2e-4);
    EXPECT_NEAR(fd, delta(g, m, x), 1e-6 * (1.0 + std::abs(fd))) << id;
  }
}

TEST(Functional, LionsIsDerivativeOfDelta) {
  Rng rng(3);
  for (const std::string& id : builtin_functional_ids()) {
    const auto g = builtin_functional(id);
    const auto m = random_measure(rng, 3);
    const BoundFunctional bf(g, m);
    const double y = rng.normal();
    EXPECT_NEAR(bf.lions(y), central([&](double v) { return bf.delta(v); }, y), 1e-6) << id;
    EXPECT_NEAR(bf.lions_dy(y), central([&](double v) { return bf.lions(v); }, y), 1e-6) << id;
    const double z = rng.normal();
    const auto d_y_delta2 = [&](double v) {
      return central([&](double w) { return bf.delta2(v, w); }, z);
    };
    EXPECT_NEAR(bf.delta2_mixed(y, z), central(d_y_delta2, y), 1e-5) << id;
  }
}

TEST(Functional, CenteringAndSymmetry) {
  // The second derivative differentiates delta G(., x) again, so it is
  // centered in its last variable only; its mixed partial is symmetric.
  Rng rng(4);
  for (const std::string& id : builtin_functional_ids()) {
    const auto g = builtin_functional(id);
    const auto m = random_measure(rng, 5);
    EXPECT_NEAR(centering_defect(g, m), 0.0, 1e-12) << id;
    const double x = rng.normal(), y = rng.normal();
    const BoundFunctional bf(g, m);
    double last = 0.0;
    for (const Atom& a : m.atoms()) last += a.weight * bf.delta2(x, a.position);
    EXPECT_NEAR(last, 0.0, 1e-12 * (1.0 + std::abs(bf.delta(x)))) << id;
    EXPECT_NEAR(bf.delta2_mixed(x, y), bf.delta2_mixed(y, x), 1e-12) << id;
    const RoutePair r = mixed_derivative_routes(g, m, x, y);
    EXPECT_NEAR(r.first, r.second, 1e-9 * (1.0 + std::abs(r.first))) << id;
  }
}

TEST(Functional, SeparableBindingAgreesWithEnumeration) {
  Rng rng(5);
  for (const std::string& id : builtin_functional_ids()) {
    const auto g = builtin_functional(id);
    const PolynomialFunctional e(opaque(g), id + "_enumerated");
    const auto m = random_measure(rng, 4);
    const BoundFunctional fast(g, m), slow(e, m);
    EXPECT_NEAR(fast.value(), slow.value(), 1e-12) << id;
    for (int k = 0; k < 3; ++k) {
      const double y = rng.normal(), z = rng.normal(), l = rng.normal();
      EXPECT_NEAR(fast.delta(y), slow.delta(y), 1e-12) << id;
      EXPECT_NEAR(fast.lions(y), slow.lions(y), 1e-12) << id;
      EXPECT_NEAR(fast.lions_dy(y), slow.lions_dy(y), 1e-12) << id;
      EXPECT_NEAR(fast.delta2(y, z), slow.delta2(y, z), 1e-12) << id;
      EXPECT_NEAR(fast.delta2_mixed(y, z), slow.delta2_mixed(y, z), 1e-12) << id;
      EXPECT_NEAR(fast.shift_increment(l), slow.shift_increment(l), 1e-12) << id;
    }
    EXPECT_NEAR(fast.delta2_mixed_integral(), slow.delta2_mixed_integral(), 1e-12) << id;
  }
}

TEST(Functional, ShiftIncrementIsValueDifference) {
  Rng rng(6);
  for (const std::string& id : builtin_functional_ids()) {
    const auto g = builtin_functional(id);
    const auto m = random_measure(rng, 4);
    const double l = rng.normal();
    EXPECT_NEAR(BoundFunctional(g, m).shift_increment(l), eval(g, shift(m, l)) - eval(g, m), 1e-11) << id;
  }
}

TEST(Functional, LinearCombination) {
  Rng rng(7);
  const PolynomialFunctional gs[3] = {builtin_functional("mean"), builtin_functional("sin_mean_squared"),
                                      builtin_functional("mean_cubed")};
  const double cs[3] = {0.5, -2.0, 1.25};
  const auto combo = linear_combination(gs, cs);
  EXPECT_EQ(combo.arity(), 3u);
  for (int k = 0; k < 5; ++k) {
    const auto m = random_measure(rng, 4);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) expect += cs[i] * eval(gs[i], m);
    EXPECT_NEAR(eval(combo, m), expect, 1e-12);
    const double y = rng.normal();
    double dexp = 0.0;
    for (int i = 0; i < 3; ++i) dexp += cs[i] * delta(gs[i], m, y);
    EXPECT_NEAR(delta(combo, m, y), dexp, 1e-12);
  }
}

TEST(Functional, RegistryKernelsAreConsistent) {
  for (const std::string& id : builtin_functional_ids()) {
    const KernelValidation v = validate_kernel(builtin_functional(id).kernel(), 50, 3);
    EXPECT_TRUE(v.ok) << id << " partial " << v.worst_partial_error << " sup " << v.worst_sup_excess;
  }
  EXPECT_THROW(builtin_functional("no_such_functional"), RegistryError);
}

TEST(Functional, NormBoundsOfBoundedKernels) {
  const auto g = builtin_functional("sin_mean");
  // Arity one: no mixed derivatives of order two or more.
  const std::vector<double> expect = {1.0, 1.0, 0.0, 0.0};
  EXPECT_EQ(std::vector<double>(g.norm_bounds().begin(), g.norm_bounds().end()), expect);
  EXPECT_TRUE(std::isinf(builtin_functional("mean").norm(0)));
}

TEST(CalculusChecks, TaylorAndMeanValue) {
  Rng rng(8);
  for (const char* id : {"sin_mean", "tanh_mean_cubed", "sin_cos_mixed", "bounded_cubic"}) {
    const auto g = builtin_functional(id);
    for (int k = 0; k < 20; ++k) {
      const auto m0 = random_measure(rng, 3);
      const auto m1 = random_measure(rng, 3, 0.3);
      EXPECT_TRUE(taylor_check(g, m0, m1, 1).holds()) << id;
      EXPECT_TRUE(taylor_check(g, m0, m1, 2).holds()) << id;
      EXPECT_TRUE(mean_value_check(g, m0, m1).holds()) << id;
      EXPECT_TRUE(kernel_integral_check(g.kernel(), m0, m1).holds()) << id;
    }
  }
}

TEST(CalculusChecks, TaylorRemainderShrinksWithOrder) {
  const auto g = builtin_functional("sin_cos_mixed");
  const auto m0 = DiscreteMeasure::from_atoms({{0.0, 0.5}, {1.0, 0.5}});
  const auto m1 = shift(m0, 1e-2);
  const InequalityCheck c1 = taylor_check(g, m0, m1, 1), c2 = taylor_check(g, m0, m1, 2);
  EXPECT_LT(std::abs(c2.lhs), std::abs(c1.lhs));
  EXPECT_LT(c2.rhs, c1.rhs);
}

TEST(CalculusChecks, SecondDifferenceUsesSquaredStep) {
  const auto g = builtin_functional("sin_cos_mixed");
  for (double l : {1e-1, 1e-2, 1e-3}) {
    const InequalityCheck c = second_difference_check(g.kernel(), 0.3, -0.8, l);
    EXPECT_TRUE(c.holds()) << l;
  }
  // The remainder is third order in the step: shrinking l by 10 shrinks it ~1000 times.
  const double r1 = second_difference_check(g.kernel(), 0.3, -0.8, 1e-1).lhs;
  const double r2 = second_difference_check(g.kernel(), 0.3, -0.8, 1e-2).lhs;
  EXPECT_LT(r2, r1 / 200.0);
}

TEST(CalculusChecks, ProductDistance) {
  Rng rng(9);
  for (int k = 0; k < 20; ++k) {
    const DiscreteMeasure ms[2] = {random_measure(rng, 3), random_measure(rng, 2)};
    const DiscreteMeasure mus[2] = {random_measure(rng, 3), random_measure(rng, 3)};
    EXPECT_TRUE(product_distance_check(ms, mus).holds());
  }
}
