#include "mflab/calculus_checks.hpp"

#include <cmath>
#include <vector>

#include "mflab/errors.hpp"
#include "mflab/transport.hpp"

namespace mflab {
namespace {

constexpr double kNoise = 1e-10;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

InequalityCheck taylor_check(const PolynomialFunctional& g, const DiscreteMeasure& m0, const DiscreteMeasure& m1,
                             int order) {
  if (order < 1 || order > 2) throw InvalidArgument("taylor_check supports orders 1 and 2");
  if (g.smoothness() < order + 1 || g.norm_bounds().size() <= static_cast<std::size_t>(order + 1))
    throw InvalidArgument("functional is not smooth enough for this Taylor order");
  const BoundFunctional at0(g, m0);
  const double g0 = at0.value();
  const double g1 = eval(g, m1);
  const SignedMeasure d = difference(m1, m0);

  double first = 0.0;
  for (const Atom& a : d.atoms) first += a.weight * at0.delta(a.position);
  double remainder = g1 - g0 - first;
  if (order == 2) {
    double second = 0.0;
    for (const Atom& a : d.atoms)
      for (const Atom& b : d.atoms) second += a.weight * b.weight * at0.delta2(a.position, b.position);
    remainder -= 0.5 * second;
  }
  InequalityCheck out;
  out.lhs = std::abs(remainder);
  out.rhs = std::pow(dkr(m0, m1), order + 1) / factorial(order + 1) * g.norm_bounds()[order + 1];
  out.noise = kNoise * (1.0 + std::abs(g0) + std::abs(g1));
  return out;
}

InequalityCheck mean_value_check(const PolynomialFunctional& g, const DiscreteMeasure& m0, const DiscreteMeasure& m1) {
  if (g.norm_bounds().size() < 2) throw InvalidArgument("functional needs a first-derivative bound");
  const double g0 = eval(g, m0), g1 = eval(g, m1);
  InequalityCheck out;
  out.lhs = std::abs(g1 - g0);
  out.rhs = dkr(m0, m1) * g.norm_bounds()[1];
  out.noise = kNoise * (1.0 + std::abs(g0) + std::abs(g1));
  return out;
}

InequalityCheck kernel_integral_check(const Kernel& g, const DiscreteMeasure& m0, const DiscreteMeasure& m1) {
  const std::size_t n = g.arity();
  const SignedMeasure d = difference(m1, m0);
  std::vector<const SignedMeasure*> slots(n, &d);
  const std::vector<int> zero(n, 0), ones(n, 1);
  double scale = 0.0;
  const double value = tensor_integrate(slots, [&](std::span<const double> x) {
    const double v = g.partial(zero, x);
    scale = std::max(scale, std::abs(v));
    return v;
  });
  InequalityCheck out;
  out.lhs = std::abs(value);
  out.rhs = std::pow(dkr(m0, m1), static_cast<double>(n)) * g.partial_sup(ones);
  out.noise = kNoise * (1.0 + scale);
  return out;
}

InequalityCheck product_distance_check(std::span<const DiscreteMeasure> ms, std::span<const DiscreteMeasure> mus) {
  if (ms.size() != mus.size() || ms.empty()) throw InvalidArgument("product check needs matching factor lists");
  const auto a = product_measure(ms);
  const auto b = product_measure(mus);
  InequalityCheck out;
  out.lhs = transport_distance_l1(a, b);
  for (std::size_t k = 0; k < ms.size(); ++k) out.rhs += dkr(ms[k], mus[k]);
  out.noise = kNoise * (1.0 + out.rhs);
  return out;
}

InequalityCheck second_difference_check(const Kernel& g, double x, double y, double lambda) {
  if (g.arity() != 2) throw InvalidArgument("second difference check needs a kernel of arity 2");
  if (g.smoothness() < 3) throw InvalidArgument("second difference check needs three derivatives");
  auto v = [&](double a, double b) { return g.value(std::vector<double>{a, b}); };
  const double diff = v(x + lambda, y + lambda) - v(x + lambda, y) - v(x, y + lambda) + v(x, y);
  const double mixed = g.partial(std::vector<int>{1, 1}, std::vector<double>{x, y});
  double third = 0.0;
  for (int i = 0; i <= 3; ++i) third += g.partial_sup(std::vector<int>{i, 3 - i});
  InequalityCheck out;
  out.lhs = std::abs(diff - lambda * lambda * mixed);
  out.rhs = std::pow(std::abs(lambda), 3) / 2.0 * third;
  out.noise = 1e-14 * (1.0 + std::abs(v(x, y)) + std::abs(v(x + lambda, y + lambda)));
  return out;
}

RoutePair mixed_derivative_routes(const PolynomialFunctional& g, const DiscreteMeasure& m, double x, double y) {
  RoutePair out;
  out.first = BoundFunctional(g, m).delta2_mixed(x, y);
  // d_x delta G(m, x) = sum_k integral of d_k phi(x at slot k) dm^{n-1}: one
  // polynomial of arity n-1 per slot, each differentiated again in m.
  const std::size_t n = g.arity();
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<int> alpha(n, 0);
    alpha[k] = 1;
    if (n == 1) continue;  // constant in m: no further derivative
    auto pinned = std::make_shared<PinnedKernel>(g.kernel_ptr(), k, x, alpha);
    const PolynomialFunctional h(pinned);
    out.second += lions(h, m, y);
  }
  return out;
}

double centering_defect(const PolynomialFunctional& g, const DiscreteMeasure& m) {
  const BoundFunctional b(g, m);
  double total = 0.0;
  for (const Atom& a : m.atoms()) total += a.weight * b.delta(a.position);
  return total;
}

}  // namespace mflab
