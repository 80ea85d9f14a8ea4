#include "mflab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mflab/errors.hpp"
#include "mflab/rng.hpp"

namespace mflab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 0 * inf = 0 for bounds: a vanishing factor kills the product.
double bound_product(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

class EnumeratedBinding final : public BoundKernel {
 public:
  EnumeratedBinding(const Kernel& k, const DiscreteMeasure& m, const TensorBudget& budget)
      : kernel_(k), m_(m), budget_(budget), base_{std::vector<Atom>(m.atoms().begin(), m.atoms().end())} {}

  double section(std::span<const FixedSlot> fixed, std::span<const int> alpha) const override {
    return integrate(base_, fixed, alpha);
  }

  double shift_increment(double lambda) const override {
    SignedMeasure shifted = base_;
    for (Atom& a : shifted.atoms) a.position += lambda;
    const std::vector<int> zero(kernel_.arity(), 0);
    return integrate(shifted, {}, zero) - integrate(base_, {}, zero);
  }

  std::size_t arity() const override { return kernel_.arity(); }

 private:
  double integrate(const SignedMeasure& free, std::span<const FixedSlot> fixed, std::span<const int> alpha) const {
    const std::size_t n = kernel_.arity();
    std::vector<SignedMeasure> pinned;
    pinned.reserve(fixed.size());
    std::vector<const SignedMeasure*> slots(n, &free);
    for (const FixedSlot& f : fixed) {
      if (f.slot >= n) throw InvalidArgument("fixed slot out of range");
      pinned.push_back({{{f.value, 1.0}}});
    }
    for (std::size_t i = 0; i < fixed.size(); ++i) slots[fixed[i].slot] = &pinned[i];
    std::vector<int> a(alpha.begin(), alpha.end());
    return tensor_integrate(
        slots, [&](std::span<const double> x) { return kernel_.partial(a, x); }, budget_);
  }

  const Kernel& kernel_;
  DiscreteMeasure m_;
  TensorBudget budget_;
  SignedMeasure base_;
};

class SeparableBinding final : public BoundKernel {
 public:
  SeparableBinding(const SeparableKernel& k, const DiscreteMeasure& m) : kernel_(k), m_(m) {
    const std::size_t n = k.arity();
    moments_.resize(k.terms().size() * n);
    for (std::size_t t = 0; t < k.terms().size(); ++t)
      for (std::size_t i = 0; i < n; ++i) {
        auto& mom = moments_[t * n + i];
        const Factor1D& g = k.terms()[t].factors[i];
        integrate(g, mom);
      }
    // Products of the order-0 integrals over the slots left free by one or two pins.
    others_.assign(k.terms().size() * n, 1.0);
    pair_others_.assign(k.terms().size() * n * n, 1.0);
    for (std::size_t t = 0; t < k.terms().size(); ++t)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < n; ++i) {
          const double v = moments_[t * n + i][0];
          if (i != a) others_[t * n + a] *= v;
          for (std::size_t b = 0; b < n; ++b)
            if (i != a && i != b) pair_others_[(t * n + a) * n + b] *= v;
        }
  }

  double section(std::span<const FixedSlot> fixed, std::span<const int> alpha) const override {
    const std::size_t n = kernel_.arity();
    double total = 0.0;
    for (std::size_t t = 0; t < kernel_.terms().size(); ++t) {
      const auto& term = kernel_.terms()[t];
      double prod = term.coefficient;
      for (std::size_t i = 0; i < n && prod != 0.0; ++i) {
        const int d = alpha[i];
        if (d > Factor1D::kMaxOrder) return 0.0 * prod;
        const FixedSlot* pin = nullptr;
        for (const FixedSlot& f : fixed)
          if (f.slot == i) pin = &f;
        prod *= pin ? term.factors[i].derivative(d, pin->value) : moments_[t * n + i][d];
      }
      total += prod;
    }
    return total;
  }

  std::size_t arity() const override { return kernel_.arity(); }

  double pinned_sum(double y, int order) const override {
    if (order > Factor1D::kMaxOrder) return 0.0;
    const std::size_t n = kernel_.arity();
    double total = 0.0;
    for (std::size_t t = 0; t < kernel_.terms().size(); ++t) {
      const auto& term = kernel_.terms()[t];
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double rest = others_[t * n + k];
        if (rest != 0.0) acc += term.factors[k].derivative(order, y) * rest;
      }
      total += term.coefficient * acc;
    }
    return total;
  }

  double pinned_pair_sum(double y1, int o1, double y2, int o2) const override {
    if (o1 > Factor1D::kMaxOrder || o2 > Factor1D::kMaxOrder) return 0.0;
    const std::size_t n = kernel_.arity();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (std::size_t t = 0; t < kernel_.terms().size(); ++t) {
      const auto& term = kernel_.terms()[t];
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double a = term.factors[k].derivative(o1, y1);
        if (a == 0.0) continue;
        for (std::size_t l = 0; l < n; ++l) {
          if (l == k) continue;
          const double rest = pair_others_[(t * n + k) * n + l];
          if (rest != 0.0) acc += a * term.factors[l].derivative(o2, y2) * rest;
        }
      }
      total += term.coefficient * acc;
    }
    return total;
  }

  double shift_increment(double lambda) const override {
    const std::size_t n = kernel_.arity();
    double total = 0.0;
    std::vector<double> before(n), delta(n);
    for (std::size_t t = 0; t < kernel_.terms().size(); ++t) {
      const auto& term = kernel_.terms()[t];
      for (std::size_t i = 0; i < n; ++i) {
        before[i] = moments_[t * n + i][0];
        delta[i] = increment(term.factors[i], lambda);
      }
      // prod(b + d) - prod(b) = sum_k [prod_{i<k} b_i] d_k [prod_{i>k} (b_i + d_i)]
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (delta[k] == 0.0) continue;
        double p = delta[k];
        for (std::size_t i = 0; i < k; ++i) p *= before[i];
        for (std::size_t i = k + 1; i < n; ++i) p *= before[i] + delta[i];
        acc += p;
      }
      total += term.coefficient * acc;
    }
    return total;
  }

 private:
  // Compensated sums of every derivative order against m.
  void integrate(const Factor1D& g, std::array<double, Factor1D::kMaxOrder + 1>& mom) const {
    std::array<double, Factor1D::kMaxOrder + 1> sum{}, comp{}, d{};
    for (const Atom& a : m_.atoms()) {
      g.derivatives(a.position, d);
      for (int k = 0; k <= Factor1D::kMaxOrder; ++k) {
        const double y = a.weight * d[k] - comp[k];
        const double t = sum[k] + y;
        comp[k] = (t - sum[k]) - y;
        sum[k] = t;
      }
    }
    mom = sum;
  }

  double increment(const Factor1D& g, double lambda) const {
    if (g.basis == Basis1D::One) return 0.0;
    double sum = 0.0, comp = 0.0;
    for (const Atom& a : m_.atoms()) {
      const double y = a.weight * g.increment(a.position, lambda) - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    return sum;
  }

  const SeparableKernel& kernel_;
  DiscreteMeasure m_;
  std::vector<std::array<double, Factor1D::kMaxOrder + 1>> moments_;
  std::vector<double> others_, pair_others_;
};

}  // namespace

double Kernel::value(std::span<const double> x) const {
  const std::vector<int> zero(arity(), 0);
  return partial(zero, x);
}

double BoundKernel::pinned_sum(double y, int order) const {
  const std::size_t n = arity();
  std::vector<int> alpha(n, 0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    alpha[k] = order;
    const FixedSlot pin{k, y};
    total += section({&pin, 1}, alpha);
    alpha[k] = 0;
  }
  return total;
}

double BoundKernel::pinned_pair_sum(double y1, int o1, double y2, int o2) const {
  const std::size_t n = arity();
  std::vector<int> alpha(n, 0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      if (l == k) continue;
      alpha[k] = o1;
      alpha[l] = o2;
      const FixedSlot pins[2] = {{k, y1}, {l, y2}};
      total += section(pins, alpha);
      alpha[k] = alpha[l] = 0;
    }
  return total;
}

std::unique_ptr<BoundKernel> Kernel::bind(const DiscreteMeasure& m, const TensorBudget& budget) const {
  return bind_by_enumeration(*this, m, budget);
}

std::unique_ptr<BoundKernel> bind_by_enumeration(const Kernel& k, const DiscreteMeasure& m,
                                                 const TensorBudget& budget) {
  return std::make_unique<EnumeratedBinding>(k, m, budget);
}

double Factor1D::derivative(int order, double x) const {
  switch (basis) {
    case Basis1D::One:
      return order == 0 ? 1.0 : 0.0;
    case Basis1D::Identity:
      return order == 0 ? x : (order == 1 ? 1.0 : 0.0);
    case Basis1D::Square:
      switch (order) {
        case 0: return x * x;
        case 1: return 2.0 * x;
        case 2: return 2.0;
        default: return 0.0;
      }
    case Basis1D::Cube:
      switch (order) {
        case 0: return x * x * x;
        case 1: return 3.0 * x * x;
        case 2: return 6.0 * x;
        case 3: return 6.0;
        default: return 0.0;
      }
    case Basis1D::Sin:
      switch (order % 4) {
        case 0: return std::sin(x);
        case 1: return std::cos(x);
        case 2: return -std::sin(x);
        default: return -std::cos(x);
      }
    case Basis1D::Cos:
      switch (order % 4) {
        case 0: return std::cos(x);
        case 1: return -std::sin(x);
        case 2: return -std::cos(x);
        default: return std::sin(x);
      }
    case Basis1D::Tanh: {
      const double t = std::tanh(x);
      const double s = 1.0 - t * t;
      switch (order) {
        case 0: return t;
        case 1: return s;
        case 2: return -2.0 * t * s;
        case 3: return s * (6.0 * t * t - 2.0);
        case 4: return 8.0 * t * s * (2.0 - 3.0 * t * t);
        default: throw Unsupported("tanh derivatives are available up to order 4");
      }
    }
  }
  return 0.0;
}

void Factor1D::derivatives(double x, std::array<double, kMaxOrder + 1>& out) const {
  switch (basis) {
    case Basis1D::Sin:
    case Basis1D::Cos: {
      const double sn = std::sin(x), cs = std::cos(x);
      const std::array<double, 4> c = basis == Basis1D::Sin ? std::array{sn, cs, -sn, -cs} : std::array{cs, -sn, -cs, sn};
      for (int d = 0; d <= kMaxOrder; ++d) out[d] = c[d % 4];
      return;
    }
    case Basis1D::Tanh: {
      const double t = std::tanh(x);
      const double s = 1.0 - t * t;
      out = {t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0), 8.0 * t * s * (2.0 - 3.0 * t * t)};
      return;
    }
    default:
      for (int d = 0; d <= kMaxOrder; ++d) out[d] = derivative(d, x);
  }
}

double Factor1D::derivative_sup(int order) const {
  switch (basis) {
    case Basis1D::One:
      return order == 0 ? 1.0 : 0.0;
    case Basis1D::Identity:
      return order == 0 ? kInf : (order == 1 ? 1.0 : 0.0);
    case Basis1D::Square:
      return order < 2 ? kInf : (order == 2 ? 2.0 : 0.0);
    case Basis1D::Cube:
      return order < 3 ? kInf : (order == 3 ? 6.0 : 0.0);
    case Basis1D::Sin:
    case Basis1D::Cos:
      return 1.0;
    case Basis1D::Tanh: {
      // max of |tanh^{(k)}|: 1, 1, 4/(3 sqrt 3), 2, 4.08588...
      static constexpr double sups[] = {1.0, 1.0, 0.7698003589195010, 2.0, 4.0858856};
      if (order > 4) throw Unsupported("tanh derivatives are available up to order 4");
      return sups[order];
    }
  }
  return kInf;
}

double Factor1D::increment(double x, double lambda) const {
  switch (basis) {
    case Basis1D::One:
      return 0.0;
    case Basis1D::Identity:
      return lambda;
    case Basis1D::Square:
      return lambda * (2.0 * x + lambda);
    case Basis1D::Cube:
      return lambda * (3.0 * x * x + 3.0 * x * lambda + lambda * lambda);
    case Basis1D::Sin:
      return 2.0 * std::cos(x + 0.5 * lambda) * std::sin(0.5 * lambda);
    case Basis1D::Cos:
      return -2.0 * std::sin(x + 0.5 * lambda) * std::sin(0.5 * lambda);
    case Basis1D::Tanh:
      // tanh a - tanh b = tanh(a - b) (1 - tanh a tanh b)
      return std::tanh(lambda) * (1.0 - std::tanh(x + lambda) * std::tanh(x));
  }
  return 0.0;
}

SeparableKernel::SeparableKernel(std::size_t arity, std::vector<Term> terms)
    : arity_(arity), terms_(std::move(terms)) {
  for (const Term& t : terms_) {
    if (t.factors.size() != arity_) throw InvalidArgument("separable kernel term has wrong number of factors");
    if (!std::isfinite(t.coefficient)) throw InvalidArgument("kernel coefficient must be finite");
  }
}

double SeparableKernel::partial(std::span<const int> alpha, std::span<const double> x) const {
  if (alpha.size() != arity_ || x.size() != arity_) throw InvalidArgument("partial: dimension mismatch");
  double total = 0.0;
  for (const Term& t : terms_) {
    double prod = t.coefficient;
    for (std::size_t i = 0; i < arity_ && prod != 0.0; ++i) prod *= t.factors[i].derivative(alpha[i], x[i]);
    total += prod;
  }
  return total;
}

double SeparableKernel::partial_sup(std::span<const int> alpha) const {
  if (alpha.size() != arity_) throw InvalidArgument("partial_sup: dimension mismatch");
  double total = 0.0;
  for (const Term& t : terms_) {
    double prod = std::abs(t.coefficient);
    for (std::size_t i = 0; i < arity_; ++i) prod = bound_product(prod, t.factors[i].derivative_sup(alpha[i]));
    total += prod;
  }
  return total;
}

std::unique_ptr<BoundKernel> SeparableKernel::bind(const DiscreteMeasure& m, const TensorBudget&) const {
  return std::make_unique<SeparableBinding>(*this, m);
}

CallableKernel::CallableKernel(std::size_t arity, int smoothness, PartialFn partial,
                               std::map<std::vector<int>, double> declared_sups)
    : arity_(arity), smoothness_(smoothness), partial_(std::move(partial)), sups_(std::move(declared_sups)) {
  if (!partial_) throw InvalidArgument("callable kernel needs a partial-derivative function");
}

double CallableKernel::partial(std::span<const int> alpha, std::span<const double> x) const {
  if (alpha.size() != arity_ || x.size() != arity_) throw InvalidArgument("partial: dimension mismatch");
  return partial_(alpha, x);
}

double CallableKernel::partial_sup(std::span<const int> alpha) const {
  auto it = sups_.find(std::vector<int>(alpha.begin(), alpha.end()));
  return it == sups_.end() ? kInf : it->second;
}

PinnedKernel::PinnedKernel(std::shared_ptr<const Kernel> base, std::size_t slot, double value,
                           std::vector<int> base_alpha)
    : base_(std::move(base)), slot_(slot), value_(value), base_alpha_(std::move(base_alpha)) {
  if (!base_ || base_->arity() == 0) throw InvalidArgument("pinned kernel needs a base of positive arity");
  if (slot_ >= base_->arity()) throw InvalidArgument("pinned slot out of range");
  if (base_alpha_.size() != base_->arity()) throw InvalidArgument("pinned kernel: derivative has wrong length");
}

int PinnedKernel::smoothness() const {
  int used = 0;
  for (int a : base_alpha_) used += a;
  return base_->smoothness() - used;
}

std::vector<int> PinnedKernel::lift(std::span<const int> alpha) const {
  std::vector<int> full(base_alpha_);
  for (std::size_t j = 0, i = 0; i < full.size(); ++i) {
    if (i == slot_) continue;
    full[i] += alpha[j++];
  }
  return full;
}

double PinnedKernel::partial(std::span<const int> alpha, std::span<const double> x) const {
  if (alpha.size() != arity() || x.size() != arity()) throw InvalidArgument("partial: dimension mismatch");
  std::vector<double> full(x.begin(), x.end());
  full.insert(full.begin() + static_cast<std::ptrdiff_t>(slot_), value_);
  return base_->partial(lift(alpha), full);
}

double PinnedKernel::partial_sup(std::span<const int> alpha) const { return base_->partial_sup(lift(alpha)); }

KernelValidation validate_kernel(const Kernel& k, std::size_t points, std::uint64_t seed) {
  KernelValidation out;
  const std::size_t n = k.arity();
  const int p = k.smoothness();
  // All multi-indices of total order <= p.
  std::vector<std::vector<int>> alphas;
  std::vector<int> a(n, 0);
  while (true) {
    int tot = 0;
    for (int v : a) tot += v;
    if (tot <= p) alphas.push_back(a);
    std::size_t i = 0;
    while (i < n && ++a[i] > p) a[i++] = 0;
    if (i == n) break;
  }
  Rng rng(seed);
  constexpr double h = 1e-5;
  std::vector<double> x(n);
  for (std::size_t s = 0; s < points; ++s) {
    for (double& v : x) v = 1.5 * rng.normal();
    for (const auto& a : alphas) {
      const double analytic = k.partial(a, x);
      const double sup = k.partial_sup(a);
      if (std::abs(analytic) > sup * (1.0 + 1e-9) + 1e-300) {
        out.worst_sup_excess = std::max(out.worst_sup_excess, std::abs(analytic) / sup - 1.0);
        out.ok = false;
      }
      std::size_t i = n;
      for (std::size_t j = 0; j < n; ++j)
        if (a[j] > 0) {
          i = j;
          break;
        }
      if (i == n) continue;
      auto lower = a;
      --lower[i];
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (k.partial(lower, xp) - k.partial(lower, xm)) / (2.0 * h);
      const double err = std::abs(fd - analytic) / std::max(1.0, std::abs(analytic));
      out.worst_partial_error = std::max(out.worst_partial_error, err);
      if (err > 1e-5) out.ok = false;
    }
  }
  return out;
}

}  // namespace mflab
