#include "mflab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>

#include "mflab/errors.hpp"
#include "mflab/rng.hpp"
#include "mflab/stats.hpp"

namespace mflab {
namespace {

std::vector<Atom> sorted_merged(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.position < b.position; });
  std::vector<Atom> out;
  out.reserve(atoms.size());
  for (const Atom& a : atoms) {
    if (!out.empty() && out.back().position == a.position)
      out.back().weight += a.weight;
    else
      out.push_back(a);
  }
  return out;
}

// Number of evaluations of an enumeration, saturating at the budget + 1.
std::uint64_t tuple_count(std::span<const std::size_t> sizes, std::uint64_t budget) {
  std::uint64_t count = 1;
  for (std::size_t s : sizes) {
    if (s == 0) return 0;
    if (count > (budget + 1) / s) return budget + 1;
    count *= s;
  }
  return count;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure() : atoms_{{0.0, 1.0}} {}

DiscreteMeasure DiscreteMeasure::from_atoms(std::vector<Atom> atoms) {
  if (atoms.empty()) throw InvalidArgument("measure must have at least one atom");
  double mass = 0.0;
  for (const Atom& a : atoms) {
    if (!std::isfinite(a.position)) throw InvalidArgument("atom position must be finite");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw InvalidArgument("atom weight must be positive");
    mass += a.weight;
  }
  if (std::abs(mass - 1.0) > kMassTolerance)
    throw InvalidArgument("atom weights must sum to one (got " + std::to_string(mass) + ")");
  return DiscreteMeasure(sorted_merged(std::move(atoms)));
}

DiscreteMeasure DiscreteMeasure::dirac(double x) { return from_atoms({{x, 1.0}}); }

DiscreteMeasure DiscreteMeasure::empirical(std::span<const double> positions) {
  if (positions.empty()) throw InvalidArgument("empirical measure of zero points");
  const double w = 1.0 / static_cast<double>(positions.size());
  std::vector<Atom> atoms;
  atoms.reserve(positions.size());
  for (double x : positions) {
    if (!std::isfinite(x)) throw InvalidArgument("atom position must be finite");
    atoms.push_back({x, w});
  }
  return DiscreteMeasure(sorted_merged(std::move(atoms)));
}

double DiscreteMeasure::mean() const { return moment(*this, 1); }

std::vector<double> DiscreteMeasure::expand_empirical(std::size_t n, double tol) const {
  if (n == 0) throw InvalidArgument("expand_empirical: n must be positive");
  std::vector<double> out;
  out.reserve(n);
  for (const Atom& a : atoms_) {
    const double k = a.weight * static_cast<double>(n);
    const double r = std::round(k);
    if (r < 1.0 || std::abs(k - r) > tol * static_cast<double>(n))
      throw InvalidArgument("measure is not an empirical measure of " + std::to_string(n) + " points");
    out.insert(out.end(), static_cast<std::size_t>(r), a.position);
  }
  if (out.size() != n)
    throw InvalidArgument("measure is not an empirical measure of " + std::to_string(n) + " points");
  return out;
}

bool DiscreteMeasure::is_empirical_of_size(std::size_t n, double tol) const {
  try {
    expand_empirical(n, tol);
    return true;
  } catch (const InvalidArgument&) {
    return false;
  }
}

SignedMeasure difference(const DiscreteMeasure& m1, const DiscreteMeasure& m0) {
  SignedMeasure d;
  for (const Atom& a : m1.atoms()) d.atoms.push_back(a);
  for (const Atom& a : m0.atoms()) d.atoms.push_back({a.position, -a.weight});
  return d;
}

DiscreteMeasure shift(const DiscreteMeasure& m, double lambda) {
  if (!std::isfinite(lambda)) throw InvalidArgument("shift amount must be finite");
  std::vector<Atom> atoms(m.atoms().begin(), m.atoms().end());
  for (Atom& a : atoms) a.position += lambda;
  // Rounding can make two nearby atoms coincide; from_atoms merges them.
  return DiscreteMeasure::from_atoms(std::move(atoms));
}

DiscreteMeasure mix(const DiscreteMeasure& m0, const DiscreteMeasure& m1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("mixing parameter must lie in [0, 1]");
  if (t == 0.0) return m0;
  if (t == 1.0) return m1;
  std::vector<Atom> atoms;
  atoms.reserve(m0.size() + m1.size());
  for (const Atom& a : m0.atoms()) atoms.push_back({a.position, (1.0 - t) * a.weight});
  for (const Atom& a : m1.atoms()) atoms.push_back({a.position, t * a.weight});
  return DiscreteMeasure::from_atoms(std::move(atoms));
}

double dkr(const DiscreteMeasure& m0, const DiscreteMeasure& m1) {
  auto a = m0.atoms();
  auto b = m1.atoms();
  std::size_t i = 0, j = 0;
  double diff = 0.0;  // F0 - F1 on the current interval
  double last = 0.0;
  bool started = false;
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i].position <= b[j].position))
      x = a[i].position;
    else
      x = b[j].position;
    if (started) total += std::abs(diff) * (x - last);
    while (i < a.size() && a[i].position == x) diff += a[i++].weight;
    while (j < b.size() && b[j].position == x) diff -= b[j++].weight;
    last = x;
    started = true;
  }
  return total;
}

double moment(const DiscreteMeasure& m, int p) {
  if (p < 0) throw InvalidArgument("moment order must be non-negative");
  std::vector<double> terms;
  terms.reserve(m.size());
  for (const Atom& a : m.atoms()) terms.push_back(a.weight * std::pow(a.position, p));
  return pairwise_sum(terms);
}

double tensor_integrate(std::span<const SignedMeasure* const> slots, const TensorIntegrand& phi,
                        const TensorBudget& budget) {
  const std::size_t n = slots.size();
  std::vector<std::size_t> sizes(n);
  for (std::size_t i = 0; i < n; ++i) sizes[i] = slots[i]->atoms.size();
  const std::uint64_t count = tuple_count(sizes, budget.max_evaluations);
  if (count > budget.max_evaluations)
    throw BudgetExceeded("exact tensor integral needs more than " + std::to_string(budget.max_evaluations) +
                         " evaluations; request the Monte Carlo mode instead");
  if (count == 0) return 0.0;
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> x(n);
  std::vector<double> w(n + 1, 1.0);  // w[i] = product of weights of slots < i
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = slots[i]->atoms[0].position;
    w[i + 1] = w[i] * slots[i]->atoms[0].weight;
  }
  // Compensated accumulation keeps long enumerations accurate.
  double sum = 0.0, comp = 0.0;
  while (true) {
    const double term = w[n] * phi(x) - comp;
    const double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
    // Odometer increment, last slot fastest.
    std::size_t k = n;
    while (k > 0) {
      --k;
      if (++idx[k] < sizes[k]) break;
      idx[k] = 0;
      if (k == 0) return sum;
    }
    if (n == 0) return sum;
    for (std::size_t i = k; i < n; ++i) {
      const Atom& a = slots[i]->atoms[idx[i]];
      x[i] = a.position;
      w[i + 1] = w[i] * a.weight;
    }
  }
}

double tensor_integrate(const DiscreteMeasure& m, std::size_t arity, const TensorIntegrand& phi,
                        const TensorBudget& budget) {
  SignedMeasure as_signed{std::vector<Atom>(m.atoms().begin(), m.atoms().end())};
  std::vector<const SignedMeasure*> slots(arity, &as_signed);
  return tensor_integrate(slots, phi, budget);
}

McEstimate tensor_integrate_mc(const DiscreteMeasure& m, std::size_t arity, const TensorIntegrand& phi,
                               std::uint64_t samples, std::uint64_t seed) {
  if (samples < 2) throw InvalidArgument("Monte Carlo integration needs at least two samples");
  auto atoms = m.atoms();
  std::vector<double> cdf(atoms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) cdf[i] = (acc += atoms[i].weight);
  Rng rng(seed);
  std::vector<double> x(arity), values(samples);
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < arity; ++i) {
      const double u = rng.uniform() * acc;
      auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      x[i] = atoms[static_cast<std::size_t>(it - cdf.begin())].position;
    }
    values[s] = phi(x);
  }
  const MeanEstimate est = mean_and_std_error(values);
  return {est.mean, est.std_error, samples};
}

std::string to_json(const DiscreteMeasure& m) {
  nlohmann::json j;
  j["atoms"] = nlohmann::json::array();
  for (const Atom& a : m.atoms()) j["atoms"].push_back({a.position, a.weight});
  return j.dump();
}

DiscreteMeasure measure_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("measure JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("atoms") || !j["atoms"].is_array())
    throw InvalidArgument("measure JSON must be an object with an \"atoms\" array");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "atoms") throw InvalidArgument("measure JSON: unknown key \"" + it.key() + "\"");
  std::vector<Atom> atoms;
  for (const auto& entry : j["atoms"]) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number())
      throw InvalidArgument("measure JSON: each atom must be [position, weight]");
    atoms.push_back({entry[0].get<double>(), entry[1].get<double>()});
  }
  return DiscreteMeasure::from_atoms(std::move(atoms));
}

}  // namespace mflab
