#include "mflab/functional.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mflab/errors.hpp"

namespace mflab {

namespace {

// Zeroed multi-index; avoids the heap for the usual small arities.
class Alpha {
 public:
  explicit Alpha(std::size_t n) : n_(n) {
    if (n > small_.size()) large_.assign(n, 0);
  }
  int& operator[](std::size_t i) { return data()[i]; }
  operator std::span<const int>() { return {data(), n_}; }

 private:
  int* data() { return large_.empty() ? small_.data() : large_.data(); }
  std::size_t n_;
  std::array<int, 8> small_{};
  std::vector<int> large_;
};

}  // namespace

PolynomialFunctional::PolynomialFunctional(std::shared_ptr<const Kernel> kernel, std::string id)
    : kernel_(std::move(kernel)), id_(std::move(id)) {
  if (!kernel_) throw InvalidArgument("functional needs a kernel");
  const int top = std::min(kernel_->smoothness(), 3);
  for (int k = 0; k <= top; ++k) bounds_.push_back(mixed_derivative_bound(*kernel_, k));
}

double PolynomialFunctional::norm(int k) const {
  if (k < 0 || static_cast<std::size_t>(k) >= bounds_.size())
    throw InvalidArgument("norm order exceeds the available smoothness");
  return *std::max_element(bounds_.begin(), bounds_.begin() + k + 1);
}

double PolynomialFunctional::mixed_derivative_bound(const Kernel& k, int order) {
  const std::size_t n = k.arity();
  if (order < 0) throw InvalidArgument("negative derivative order");
  if (static_cast<std::size_t>(order) > n) return 0.0;  // fewer free slots than derivatives
  // Walk ordered tuples of distinct slots; the bound only depends on the set
  // of slots, so each set is weighted by order! permutations.
  double factorial = 1.0;
  for (int i = 2; i <= order; ++i) factorial *= i;
  double total = 0.0;
  std::vector<int> alpha(n, 0);
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + order, true);
  std::sort(pick.begin(), pick.end());
  do {
    for (std::size_t i = 0; i < n; ++i) alpha[i] = pick[i] ? 1 : 0;
    const double s = k.partial_sup(alpha);
    if (s != 0.0) total += factorial * s;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return total;
}

BoundFunctional::BoundFunctional(const PolynomialFunctional& g, const DiscreteMeasure& m, const TensorBudget& budget)
    : n_(g.arity()), kernel_(g.kernel_ptr()), m_(m), bound_(kernel_->bind(m_, budget)) {}

double BoundFunctional::value() const {
  Alpha zero(n_);
  return bound_->section({}, zero);
}

double BoundFunctional::sum_single(double y, int order) const { return bound_->pinned_sum(y, order); }

double BoundFunctional::delta(double y) const {
  return sum_single(y, 0) - static_cast<double>(n_) * value();
}

double BoundFunctional::lions(double y) const { return sum_single(y, 1); }

double BoundFunctional::lions_dy(double y) const { return sum_single(y, 2); }

double BoundFunctional::delta2(double y1, double y2) const {
  const double pairs = bound_->pinned_pair_sum(y1, 0, y2, 0);
  const double n = static_cast<double>(n_);
  return pairs - (n - 1.0) * sum_single(y1, 0) - n * delta(y2);
}

double BoundFunctional::delta2_mixed(double y1, double y2) const { return bound_->pinned_pair_sum(y1, 1, y2, 1); }

double BoundFunctional::delta2_mixed_integral() const {
  Alpha alpha(n_);
  double total = 0.0;
  for (std::size_t k = 0; k < n_; ++k)
    for (std::size_t l = 0; l < n_; ++l) {
      if (l == k) continue;
      alpha[k] = alpha[l] = 1;
      total += bound_->section({}, alpha);
      alpha[k] = alpha[l] = 0;
    }
  return total;
}

double BoundFunctional::shift_increment(double lambda) const {
  if (n_ == 0 || lambda == 0.0) return 0.0;
  return bound_->shift_increment(lambda);
}

double eval(const PolynomialFunctional& g, const DiscreteMeasure& m) { return BoundFunctional(g, m).value(); }

double delta(const PolynomialFunctional& g, const DiscreteMeasure& m, double y) {
  return BoundFunctional(g, m).delta(y);
}

double delta2(const PolynomialFunctional& g, const DiscreteMeasure& m, double y1, double y2) {
  return BoundFunctional(g, m).delta2(y1, y2);
}

double lions(const PolynomialFunctional& g, const DiscreteMeasure& m, double y) {
  return BoundFunctional(g, m).lions(y);
}

double directional_fd(const PolynomialFunctional& g, const DiscreteMeasure& m, double x, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("finite-difference step must lie in (0, 1]");
  const DiscreteMeasure moved = mix(m, DiscreteMeasure::dirac(x), eta);
  return (eval(g, moved) - eval(g, m)) / eta;
}

PolynomialFunctional linear_combination(std::span<const PolynomialFunctional> gs, std::span<const double> coeffs) {
  if (gs.size() != coeffs.size() || gs.empty()) throw InvalidArgument("linear_combination: size mismatch");
  std::size_t arity = 0;
  for (const auto& g : gs) arity = std::max(arity, g.arity());
  std::vector<SeparableKernel::Term> terms;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto* sep = dynamic_cast<const SeparableKernel*>(&gs[i].kernel());
    if (!sep) throw Unsupported("linear_combination needs separable kernels");
    for (auto t : sep->terms()) {
      t.coefficient *= coeffs[i];
      t.factors.resize(arity, Factor1D{Basis1D::One});
      terms.push_back(std::move(t));
    }
  }
  return PolynomialFunctional(std::make_shared<SeparableKernel>(arity, std::move(terms)), "combination");
}

}  // namespace mflab
