#pragma once

#include <span>

#include "mflab/functional.hpp"
#include "mflab/kernel.hpp"
#include "mflab/measure.hpp"

namespace mflab {

// One side-by-side comparison of an inequality lhs <= rhs.
struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  // Absolute allowance for floating-point noise in lhs.
  double noise = 0.0;
  bool holds() const { return lhs <= rhs + noise; }
};

// Remainder of the order-`order` Taylor expansion of G around m0, evaluated
// at m1, against DKR(m0, m1)^{order+1} / (order+1)! * ||G||_{order+1}.
// order must be 1 or 2 and G needs smoothness >= order + 1.
InequalityCheck taylor_check(const PolynomialFunctional& g, const DiscreteMeasure& m0, const DiscreteMeasure& m1,
                             int order);

// |G(m1) - G(m0)| against DKR(m0, m1) * sup |d_x delta G|.
InequalityCheck mean_value_check(const PolynomialFunctional& g, const DiscreteMeasure& m0, const DiscreteMeasure& m1);

// |integral of g d(m1 - m0)^{(x)n}| against DKR^n * sup |d^n g / dx_1..dx_n|.
InequalityCheck kernel_integral_check(const Kernel& g, const DiscreteMeasure& m0, const DiscreteMeasure& m1);

// Transport distance between product measures (L1 ground cost) against the
// sum of the one-dimensional distances of the factors.
InequalityCheck product_distance_check(std::span<const DiscreteMeasure> ms, std::span<const DiscreteMeasure> mus);

// |g(x+l, y+l) - g(x+l, y) - g(x, y+l) + g(x, y) - l^2 g_xy(x, y)|
// against |l|^3 / 2 * sum over |alpha| = 3 of sup |d^alpha g|.
InequalityCheck second_difference_check(const Kernel& g, double x, double y, double lambda);

// The two orders of differentiation of the mixed second derivative:
// first is d_x d_y of delta^2 G(m, x, y); second is the Lions derivative at
// y of the functional m -> d_x delta G(m, x), computed from pinned kernels.
struct RoutePair {
  double first = 0.0;
  double second = 0.0;
};
RoutePair mixed_derivative_routes(const PolynomialFunctional& g, const DiscreteMeasure& m, double x, double y);

// integral of delta G(m, x) dm(x); zero for the canonical derivative.
double centering_defect(const PolynomialFunctional& g, const DiscreteMeasure& m);

}  // namespace mflab
