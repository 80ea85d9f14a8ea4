#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mflab/measure.hpp"

namespace mflab {

// A coordinate of the kernel pinned to a value instead of being integrated.
struct FixedSlot {
  std::size_t slot;
  double value;
};

// Kernel phi: R^n -> R together with its measure m. Free coordinates are
// integrated against m, so a BoundKernel answers questions of the form
//   integral of d^alpha phi(..., y_k at slot k, ...) dm^{(x) free slots}.
class BoundKernel {
 public:
  virtual ~BoundKernel() = default;
  // alpha has one entry per slot (derivative order in that coordinate).
  virtual double section(std::span<const FixedSlot> fixed, std::span<const int> alpha) const = 0;
  // G(Sh(m, lambda)) - G(m), where G = integral of phi dm^{(x)n}.
  virtual double shift_increment(double lambda) const = 0;
  virtual std::size_t arity() const = 0;

  // Sum over slots k of the section with y pinned at k, differentiated
  // `order` times there.
  virtual double pinned_sum(double y, int order) const;
  // Sum over ordered pairs of distinct slots k, l of the section with y1 at k
  // (order o1) and y2 at l (order o2).
  virtual double pinned_pair_sum(double y1, int o1, double y2, int o2) const;
};

class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual std::size_t arity() const = 0;
  // Highest total derivative order available from partial().
  virtual int smoothness() const = 0;
  // d^alpha phi at x; alpha.size() == x.size() == arity().
  virtual double partial(std::span<const int> alpha, std::span<const double> x) const = 0;
  // Upper bound of sup |d^alpha phi| over R^n (may be +infinity).
  virtual double partial_sup(std::span<const int> alpha) const = 0;
  virtual std::unique_ptr<BoundKernel> bind(const DiscreteMeasure& m, const TensorBudget& budget) const;

  double value(std::span<const double> x) const;
};

// Binding that enumerates atom tuples; works for any kernel.
std::unique_ptr<BoundKernel> bind_by_enumeration(const Kernel& k, const DiscreteMeasure& m,
                                                 const TensorBudget& budget);

// Smooth one-dimensional building blocks with closed-form derivatives.
enum class Basis1D { One, Identity, Square, Cube, Sin, Cos, Tanh };

struct Factor1D {
  static constexpr int kMaxOrder = 4;
  Basis1D basis;
  double derivative(int order, double x) const;
  // Orders 0..kMaxOrder at once, sharing the transcendental evaluations.
  void derivatives(double x, std::array<double, kMaxOrder + 1>& out) const;
  // sup over R of |g^{(order)}|.
  double derivative_sup(int order) const;
  // g(x + lambda) - g(x) without cancellation.
  double increment(double x, double lambda) const;
};

// phi(x) = sum_t c_t prod_i g_{t,i}(x_i). Integrals factor slot by slot, so
// every section costs O(terms * arity) after binding.
class SeparableKernel final : public Kernel {
 public:
  struct Term {
    double coefficient;
    std::vector<Factor1D> factors;
  };

  SeparableKernel(std::size_t arity, std::vector<Term> terms);

  std::size_t arity() const override { return arity_; }
  int smoothness() const override { return Factor1D::kMaxOrder; }
  double partial(std::span<const int> alpha, std::span<const double> x) const override;
  double partial_sup(std::span<const int> alpha) const override;
  std::unique_ptr<BoundKernel> bind(const DiscreteMeasure& m, const TensorBudget& budget) const override;

  const std::vector<Term>& terms() const { return terms_; }

 private:
  std::size_t arity_;
  std::vector<Term> terms_;
};

// Kernel given by a callable; derivative bounds are declared by the caller
// and can be checked with validate_kernel().
class CallableKernel final : public Kernel {
 public:
  using PartialFn = std::function<double(std::span<const int>, std::span<const double>)>;
  CallableKernel(std::size_t arity, int smoothness, PartialFn partial,
                 std::map<std::vector<int>, double> declared_sups);

  std::size_t arity() const override { return arity_; }
  int smoothness() const override { return smoothness_; }
  double partial(std::span<const int> alpha, std::span<const double> x) const override;
  // Declared value, or +infinity when no bound was declared for alpha.
  double partial_sup(std::span<const int> alpha) const override;

 private:
  std::size_t arity_;
  int smoothness_;
  PartialFn partial_;
  std::map<std::vector<int>, double> sups_;
};

// Kernel of arity n - 1 obtained from a base kernel by pinning slot `slot`
// to `value` and differentiating the base by `base_alpha` (length n).
class PinnedKernel final : public Kernel {
 public:
  PinnedKernel(std::shared_ptr<const Kernel> base, std::size_t slot, double value, std::vector<int> base_alpha);

  std::size_t arity() const override { return base_->arity() - 1; }
  int smoothness() const override;
  double partial(std::span<const int> alpha, std::span<const double> x) const override;
  double partial_sup(std::span<const int> alpha) const override;

 private:
  std::vector<int> lift(std::span<const int> alpha) const;
  std::shared_ptr<const Kernel> base_;
  std::size_t slot_;
  double value_;
  std::vector<int> base_alpha_;
};

struct KernelValidation {
  double worst_partial_error = 0.0;  // relative, against central differences
  double worst_sup_excess = 0.0;     // sampled |d^alpha phi| / declared sup - 1, if positive
  bool ok = true;
};

// Spot-checks analytic partials against central finite differences (step
// 1e-5, relative tolerance 1e-5) and declared sups against sampled values.
KernelValidation validate_kernel(const Kernel& k, std::size_t points, std::uint64_t seed);

}  // namespace mflab
