#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mflab {

struct Atom {
  double position;
  double weight;
  bool operator==(const Atom&) const = default;
};

// Probability measure with finitely many atoms. Atoms are kept sorted by
// position with coincident positions merged, so equal measures compare equal.
class DiscreteMeasure {
 public:
  static constexpr double kMassTolerance = 1e-12;

  // Point mass at the origin.
  DiscreteMeasure();

  // Validates (finite positions, positive weights, unit mass), sorts, merges.
  static DiscreteMeasure from_atoms(std::vector<Atom> atoms);
  static DiscreteMeasure dirac(double x);
  // Empirical measure (1/N) sum_k delta_{x_k}.
  static DiscreteMeasure empirical(std::span<const double> positions);

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double mean() const;

  // If every weight is an integer multiple of 1/n, returns the n positions
  // (with repetition) that generate this measure as an empirical measure.
  std::vector<double> expand_empirical(std::size_t n, double tol = 1e-9) const;
  bool is_empirical_of_size(std::size_t n, double tol = 1e-9) const;

  bool operator==(const DiscreteMeasure&) const = default;

 private:
  explicit DiscreteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {}
  std::vector<Atom> atoms_;
};

// Finite signed measure, e.g. m1 - m0. No normalization is imposed.
struct SignedMeasure {
  std::vector<Atom> atoms;
};

SignedMeasure difference(const DiscreteMeasure& m1, const DiscreteMeasure& m0);

// Push-forward under x -> x + lambda.
DiscreteMeasure shift(const DiscreteMeasure& m, double lambda);

// (1 - t) m0 + t m1, t in [0, 1].
DiscreteMeasure mix(const DiscreteMeasure& m0, const DiscreteMeasure& m1, double t);

// Kantorovich-Rubinstein (Wasserstein-1) distance, computed as the L1 norm
// of the difference of the cumulative distribution functions.
double dkr(const DiscreteMeasure& m0, const DiscreteMeasure& m1);

// integral of x^p dm, p >= 0.
double moment(const DiscreteMeasure& m, int p);

struct TensorBudget {
  std::uint64_t max_evaluations = 10'000'000;
};

using TensorIntegrand = std::function<double(std::span<const double>)>;

// Exact integral of phi against m^{(x) arity}, by enumeration of atom tuples.
// Throws BudgetExceeded when size()^arity exceeds the budget.
double tensor_integrate(const DiscreteMeasure& m, std::size_t arity, const TensorIntegrand& phi,
                        const TensorBudget& budget = {});

// Same integral against a product of per-slot signed measures.
double tensor_integrate(std::span<const SignedMeasure* const> slots, const TensorIntegrand& phi,
                        const TensorBudget& budget = {});

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

// Monte Carlo estimate of the same integral from i.i.d. tuples drawn from m.
McEstimate tensor_integrate_mc(const DiscreteMeasure& m, std::size_t arity, const TensorIntegrand& phi,
                               std::uint64_t samples, std::uint64_t seed);

// JSON form: {"atoms": [[position, weight], ...]}
std::string to_json(const DiscreteMeasure& m);
DiscreteMeasure measure_from_json(std::string_view text);

}  // namespace mflab
