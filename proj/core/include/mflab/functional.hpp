#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mflab/kernel.hpp"
#include "mflab/measure.hpp"

namespace mflab {

// G(m) = integral of phi dm^{(x)n} for a kernel phi of arity n.
class PolynomialFunctional {
 public:
  PolynomialFunctional(std::shared_ptr<const Kernel> kernel, std::string id = {});

  std::size_t arity() const { return kernel_->arity(); }
  int smoothness() const { return kernel_->smoothness(); }
  const Kernel& kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  const std::string& id() const { return id_; }

  // bounds[k] bounds sup |d^k/dx_1..dx_k delta^k G (m, x_1..x_k)| over all m
  // and x, for k = 0..min(smoothness, 3); bounds[0] bounds sup |G|.
  std::span<const double> norm_bounds() const { return bounds_; }
  // Largest of bounds[0..k].
  double norm(int k) const;

  // Bound on the fully mixed derivative of order k, from the kernel's
  // partial sups summed over ordered k-tuples of distinct slots.
  static double mixed_derivative_bound(const Kernel& k, int order);

 private:
  std::shared_ptr<const Kernel> kernel_;
  std::string id_;
  std::vector<double> bounds_;
};

// A functional bound to a measure m; every query reuses the binding.
class BoundFunctional {
 public:
  BoundFunctional(const PolynomialFunctional& g, const DiscreteMeasure& m, const TensorBudget& budget = {});

  double value() const;
  // delta G(m, y): linear functional derivative, normalized to integrate to 0.
  double delta(double y) const;
  // d/dy delta G(m, y): the Lions derivative.
  double lions(double y) const;
  // d^2/dy^2 delta G(m, y).
  double lions_dy(double y) const;
  double delta2(double y1, double y2) const;
  // d^2/dy1 dy2 delta^2 G(m, y1, y2).
  double delta2_mixed(double y1, double y2) const;
  // integral of d^2/dy1 dy2 delta^2 G(m, y1, y2) dm(y1) dm(y2).
  double delta2_mixed_integral() const;
  // G(Sh(m, lambda)) - G(m), evaluated on the shifted measure.
  double shift_increment(double lambda) const;

  const DiscreteMeasure& measure() const { return m_; }
  std::size_t arity() const { return n_; }

 private:
  double sum_single(double y, int order) const;
  std::size_t n_;
  std::shared_ptr<const Kernel> kernel_;
  DiscreteMeasure m_;
  std::unique_ptr<BoundKernel> bound_;
};

double eval(const PolynomialFunctional& g, const DiscreteMeasure& m);
double delta(const PolynomialFunctional& g, const DiscreteMeasure& m, double y);
double delta2(const PolynomialFunctional& g, const DiscreteMeasure& m, double y1, double y2);
double lions(const PolynomialFunctional& g, const DiscreteMeasure& m, double y);
// (G((1 - eta) m + eta delta_x) - G(m)) / eta
double directional_fd(const PolynomialFunctional& g, const DiscreteMeasure& m, double x, double eta);

// sum_i c_i G_i for separable kernels, padding lower arities with constant
// factors so the result is again a single polynomial functional.
PolynomialFunctional linear_combination(std::span<const PolynomialFunctional> gs, std::span<const double> coeffs);

}  // namespace mflab
