#include "mflab/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>

#include "mflab/errors.hpp"
#include "mflab/stats.hpp"

namespace mflab {

// ---------------------------------------------------------------- JumpLaw

JumpLaw JumpLaw::finite(std::string name, std::vector<JumpAtom> support) {
  if (support.empty()) throw InvalidArgument("jump law needs at least one support point");
  double mass = 0.0, mean = 0.0;
  for (const JumpAtom& a : support) {
    if (!std::isfinite(a.value) || !(a.probability > 0.0)) throw InvalidArgument("invalid jump law support point");
    mass += a.probability;
    mean += a.probability * a.value;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw InvalidArgument("jump law probabilities must sum to one");
  if (std::abs(mean) > 1e-12) throw InvalidArgument("jump law must be centered (mean " + std::to_string(mean) + ")");
  JumpLaw law;
  law.name_ = std::move(name);
  law.finite_ = true;
  law.nodes_ = std::move(support);
  double acc = 0.0;
  for (const JumpAtom& a : law.nodes_) law.cdf_.push_back(acc += a.probability);
  return law;
}

JumpLaw JumpLaw::gaussian(double sd, std::size_t nodes) {
  if (!(sd > 0.0) || nodes < 2) throw InvalidArgument("gaussian jump law needs sd > 0 and at least two nodes");
  // Golub-Welsch for the probabilists' Hermite weight.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
  for (std::size_t k = 1; k < nodes; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
    jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  std::vector<JumpAtom> pts(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double v = eig.eigenvectors()(0, static_cast<Eigen::Index>(i));
    pts[i] = {eig.eigenvalues()(static_cast<Eigen::Index>(i)), v * v};
  }
  // Symmetrize so the rule is centered to rounding.
  std::vector<JumpAtom> sym(nodes);
  double mass = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const JumpAtom& a = pts[i];
    const JumpAtom& b = pts[nodes - 1 - i];
    sym[i] = {0.5 * (a.value - b.value) * sd, 0.5 * (a.probability + b.probability)};
    mass += sym[i].probability;
  }
  for (JumpAtom& a : sym) a.probability /= mass;
  JumpLaw law;
  law.name_ = "gaussian";
  law.finite_ = false;
  law.gaussian_sd_ = sd;
  law.nodes_ = std::move(sym);
  return law;
}

JumpLaw JumpLaw::named(std::string_view name) {
  if (name == "asymmetric") return finite("asymmetric", {{2.0, 0.2}, {-0.5, 0.8}});
  if (name == "rademacher") return finite("rademacher", {{1.0, 0.5}, {-1.0, 0.5}});
  if (name == "gaussian") return gaussian(1.0);
  throw RegistryError("unknown jump law \"" + std::string(name) + "\"");
}

double JumpLaw::moment(int p) const {
  if (!finite_) {
    // Exact Gaussian moments rather than quadrature.
    if (p % 2 == 1) return 0.0;
    double m = 1.0;
    for (int k = p - 1; k > 0; k -= 2) m *= k;
    return m * std::pow(gaussian_sd_, p);
  }
  double s = 0.0;
  for (const JumpAtom& a : nodes_) s += a.probability * std::pow(a.value, p);
  return s;
}

double JumpLaw::abs_moment(int p) const {
  if (!finite_) {
    // E|Z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
    return std::pow(gaussian_sd_, p) * std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1)) / std::sqrt(M_PI);
  }
  double s = 0.0;
  for (const JumpAtom& a : nodes_) s += a.probability * std::pow(std::abs(a.value), p);
  return s;
}

std::size_t JumpLaw::sample_index(Rng& rng) const {
  if (!finite_) throw Unsupported("sample_index needs a finite-support jump law");
  const double u = rng.uniform() * cdf_.back();
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::size_t>(it - cdf_.begin());
}

double JumpLaw::sample(Rng& rng) const {
  if (!finite_) return gaussian_sd_ * rng.normal();
  return nodes_[sample_index(rng)].value;
}

// ---------------------------------------------------------- CoefficientSet

double CoefficientSet::common_volatility(const MeasureStats& s, double) const {
  return zeta_ * std::sqrt(std::max(0.0, s.h2f));
}

double CoefficientSet::extra_observable(std::size_t, double) const {
  throw InvalidArgument("model declares no extra observables");
}

MeasureStats CoefficientSet::first_stage(std::span<const double> x, std::span<const double> w) const {
  MeasureStats s;
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("statistics of an empty measure");
  const bool uniform = w.empty();
  const double inv = 1.0 / static_cast<double>(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (uniform ? inv : w[i]) * x[i];
  s.mean = mean;
  for (std::size_t j = 0; j < extra_count(); ++j) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += (uniform ? inv : w[i]) * extra_observable(j, x[i]);
    s.extra[j] = e;
  }
  return s;
}

MeasureStats CoefficientSet::stats(std::span<const double> x, std::span<const double> w) const {
  MeasureStats s = first_stage(x, w);
  const std::size_t n = x.size();
  const bool uniform = w.empty();
  const double inv = 1.0 / static_cast<double>(n);
  double h2f = 0.0, fm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = uniform ? inv : w[i];
    const double f = intensity(s, x[i]);
    const double h = amplitude(s, x[i]);
    h2f += wi * h * h * f;
    fm += wi * f;
  }
  s.h2f = h2f;
  s.f_mean = fm;
  return s;
}

MeasureStats CoefficientSet::stats(const DiscreteMeasure& m) const {
  std::vector<double> x, w;
  for (const Atom& a : m.atoms()) {
    x.push_back(a.position);
    w.push_back(a.weight);
  }
  return stats(x, w);
}

void CoefficientSet::intensity_batch(const MeasureStats& s, std::span<const double> x, std::span<double> f,
                                     std::span<double> h) const {
  for (std::size_t i = 0; i < x.size(); ++i) f[i] = intensity(s, x[i]);
  if (!h.empty())
    for (std::size_t i = 0; i < x.size(); ++i) h[i] = amplitude(s, x[i]);
}

void CoefficientSet::drift_batch(const MeasureStats& s, std::span<const double> x, std::span<double> b,
                                 std::span<double> sigma) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    b[i] = drift(s, x[i]);
    sigma[i] = diffusion(s, x[i]);
  }
}

namespace {

// tanh through exp: absolute error within a few ulp, which is all the
// coefficients need, at a third of the cost of std::tanh.
inline double tanh_abs(double x) {
  const double e = std::exp(-2.0 * std::abs(x));
  return std::copysign((1.0 - e) / (1.0 + e), x);
}

// b = -rate x, sigma constant, f = f_base + f_amp tanh(x), h = 1.
class OuTanh final : public CoefficientSet {
 public:
  OuTanh(double zeta, double rate, double sigma, double f_base, double f_amp)
      : CoefficientSet(zeta, make_bounds(zeta, rate, f_base, f_amp)),
        rate_(rate), sigma_(sigma), f_base_(f_base), f_amp_(f_amp) {}

  std::string_view name() const override { return "ou_tanh"; }
  double drift(const MeasureStats&, double x) const override { return -rate_ * x; }
  double diffusion(const MeasureStats&, double) const override { return sigma_; }
  double intensity(const MeasureStats&, double x) const override { return f_base_ + f_amp_ * tanh_abs(x); }
  double amplitude(const MeasureStats&, double) const override { return 1.0; }
  bool amplitude_is_constant() const override { return true; }

  void intensity_batch(const MeasureStats&, std::span<const double> x, std::span<double> f,
                       std::span<double> h) const override {
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = f_base_ + f_amp_ * tanh_abs(x[i]);
    std::fill(h.begin(), h.end(), 1.0);
  }
  void drift_batch(const MeasureStats&, std::span<const double> x, std::span<double> b,
                   std::span<double> sigma) const override {
    for (std::size_t i = 0; i < x.size(); ++i) b[i] = -rate_ * x[i];
    std::fill(sigma.begin(), sigma.end(), sigma_);
  }

 private:
  static ModelBounds make_bounds(double zeta, double rate, double f_base, double f_amp) {
    ModelBounds bd;
    bd.f_min = f_base - std::abs(f_amp);
    bd.f_max = f_base + std::abs(f_amp);
    bd.lip_b = std::abs(rate);
    bd.lip_sigma = 0.0;
    // |sqrt(a) - sqrt(b)| <= |a - b| / (2 sqrt(f_min)), |a - b| <= |f_amp| DKR.
    bd.lip_varsigma = bd.f_min > 0.0 ? zeta * std::abs(f_amp) / (2.0 * std::sqrt(bd.f_min)) : 0.0;
    bd.lip_fh = std::abs(f_amp);
    return bd;
  }
  double rate_, sigma_, f_base_, f_amp_;
};

// Genuinely measure-dependent coefficients with a state-dependent amplitude.
//   b = -x + 0.5 tanh(mean), sigma = 0.4 + 0.1 tanh(x),
//   f = 1 + 0.3 tanh(x) + 0.2 tanh(mean), h = 1 + 0.25 tanh(x).
class MfTanh final : public CoefficientSet {
 public:
  explicit MfTanh(double zeta) : CoefficientSet(zeta, make_bounds(zeta)) {}

  std::string_view name() const override { return "mf_tanh"; }
  double drift(const MeasureStats& s, double x) const override { return -x + 0.5 * tanh_abs(s.mean); }
  double diffusion(const MeasureStats&, double x) const override { return 0.4 + 0.1 * tanh_abs(x); }
  double intensity(const MeasureStats& s, double x) const override {
    return 1.0 + 0.3 * tanh_abs(x) + 0.2 * tanh_abs(s.mean);
  }
  double amplitude(const MeasureStats&, double x) const override { return 1.0 + 0.25 * tanh_abs(x); }

 private:
  static ModelBounds make_bounds(double zeta) {
    ModelBounds bd;
    bd.f_min = 0.5;
    bd.f_max = 1.5;
    bd.lip_b = 1.0;
    bd.lip_sigma = 0.1;
    bd.lip_fh = 0.75;
    // h^2 f >= 0.75^2 * 0.5; x -> h^2 f is 1.40625-Lipschitz and the mean
    // enters with constant 0.2 * 1.25^2.
    bd.lip_varsigma = zeta * (1.40625 + 0.3125) / (2.0 * std::sqrt(0.28125));
    return bd;
  }
};

// b = -rate x, sigma constant, no jumps: decoupled diffusions.
class Ou final : public CoefficientSet {
 public:
  Ou(double zeta, double rate, double sigma, std::string name)
      : CoefficientSet(zeta, make_bounds(rate)), rate_(rate), sigma_(sigma), name_(std::move(name)) {}

  std::string_view name() const override { return name_; }
  double drift(const MeasureStats&, double x) const override { return -rate_ * x; }
  double diffusion(const MeasureStats&, double) const override { return sigma_; }
  double intensity(const MeasureStats&, double) const override { return 0.0; }
  double amplitude(const MeasureStats&, double) const override { return 1.0; }
  bool amplitude_is_constant() const override { return true; }

 private:
  static ModelBounds make_bounds(double rate) {
    ModelBounds bd;
    bd.lip_b = std::abs(rate);
    return bd;
  }
  double rate_, sigma_;
  std::string name_;
};

// b = 0, sigma = 0, f = 1, h = 1: the limit is X_0 + zeta W_t.
class CommonShift final : public CoefficientSet {
 public:
  explicit CommonShift(double zeta) : CoefficientSet(zeta, make_bounds()) {}

  std::string_view name() const override { return "common_shift"; }
  double drift(const MeasureStats&, double) const override { return 0.0; }
  double diffusion(const MeasureStats&, double) const override { return 0.0; }
  double intensity(const MeasureStats&, double) const override { return 1.0; }
  double amplitude(const MeasureStats&, double) const override { return 1.0; }
  bool amplitude_is_constant() const override { return true; }

 private:
  static ModelBounds make_bounds() {
    ModelBounds bd;
    bd.f_min = bd.f_max = 1.0;
    return bd;
  }
};

double take(std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  if (!std::isfinite(v)) throw ConfigError("model parameter \"" + key + "\" must be finite");
  return v;
}

struct Entry {
  const char* default_nu;
  std::function<std::shared_ptr<const CoefficientSet>(double zeta, std::map<std::string, double>&)> make;
};

const std::map<std::string, Entry, std::less<>>& models() {
  static const std::map<std::string, Entry, std::less<>> table = {
      {"ou_tanh",
       {"asymmetric",
        [](double zeta, std::map<std::string, double>& p) {
          const double rate = take(p, "rate", 1.0), sigma = take(p, "sigma", 0.5);
          const double f_base = take(p, "f_base", 1.0), f_amp = take(p, "f_amp", 0.5);
          if (!(f_base - std::abs(f_amp) > 0.0)) throw ConfigError("ou_tanh needs f_base > |f_amp|");
          if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
          return std::make_shared<OuTanh>(zeta, rate, sigma, f_base, f_amp);
        }}},
      {"mf_tanh", {"asymmetric", [](double zeta, std::map<std::string, double>&) {
                     return std::make_shared<MfTanh>(zeta);
                   }}},
      {"ou",
       {"rademacher",
        [](double zeta, std::map<std::string, double>& p) {
          const double rate = take(p, "rate", 1.0), sigma = take(p, "sigma", 0.5);
          if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
          return std::make_shared<Ou>(zeta, rate, sigma, "ou");
        }}},
      {"pure_drift", {"rademacher", [](double zeta, std::map<std::string, double>& p) {
                        return std::make_shared<Ou>(zeta, take(p, "rate", 1.0), 0.0, "pure_drift");
                      }}},
      {"common_shift", {"rademacher", [](double zeta, std::map<std::string, double>&) {
                          return std::make_shared<CommonShift>(zeta);
                        }}},
  };
  return table;
}

}  // namespace

ModelSpec builtin_model(std::string_view name, std::string_view nu, const std::map<std::string, double>& params) {
  const auto& table = models();
  auto it = table.find(name);
  if (it == table.end()) throw RegistryError("unknown model \"" + std::string(name) + "\"");
  ModelSpec spec;
  spec.name = std::string(name);
  spec.nu = JumpLaw::named(nu.empty() ? it->second.default_nu : nu);
  auto rest = params;
  spec.coefficients = it->second.make(spec.nu.zeta(), rest);
  if (!rest.empty()) throw ConfigError("unknown parameter \"" + rest.begin()->first + "\" for model " + spec.name);
  return spec;
}

std::vector<std::string> builtin_model_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : models()) out.push_back(k);
  return out;
}

// ------------------------------------------------------------- validation

namespace {

struct Probe {
  std::vector<double> x, w;
  DiscreteMeasure m;
};

Probe random_probe(Rng& rng) {
  const std::size_t k = 1 + rng.below(6);
  Probe p;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p.x.push_back(1.5 * rng.normal());
    p.w.push_back(0.05 + rng.uniform());
    total += p.w.back();
  }
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < k; ++i) {
    p.w[i] /= total;
    atoms.push_back({p.x[i], p.w[i]});
  }
  // Renormalize exactly against the merged measure.
  p.m = DiscreteMeasure::from_atoms(atoms);
  p.x.clear();
  p.w.clear();
  for (const Atom& a : p.m.atoms()) {
    p.x.push_back(a.position);
    p.w.push_back(a.weight);
  }
  return p;
}

Probe perturbed(const Probe& base, Rng& rng) {
  std::vector<Atom> atoms;
  for (const Atom& a : base.m.atoms()) atoms.push_back({a.position + 0.1 * rng.normal(), a.weight});
  Probe p;
  p.m = DiscreteMeasure::from_atoms(atoms);
  for (const Atom& a : p.m.atoms()) {
    p.x.push_back(a.position);
    p.w.push_back(a.weight);
  }
  return p;
}

double fh_distance(double h1, double f1, double h2, double f2) {
  // integral over z >= 0 of |h1 1{z <= f1} - h2 1{z <= f2}|
  const double lo = std::min(f1, f2);
  const double tail = f1 > f2 ? std::abs(h1) * (f1 - f2) : std::abs(h2) * (f2 - f1);
  return lo * std::abs(h1 - h2) + tail;
}

}  // namespace

ModelValidation validate_model(const ModelSpec& spec, std::size_t probes, std::uint64_t seed) {
  const CoefficientSet& c = *spec.coefficients;
  const ModelBounds& bd = c.bounds();
  ModelValidation out;
  out.probes = probes;
  Rng rng(seed);
  auto fail = [&](const std::string& why) {
    if (out.ok) out.failure = why;
    out.ok = false;
  };
  constexpr double kSlack = 1.0 + 1e-6;
  for (std::size_t i = 0; i < probes; ++i) {
    const Probe p1 = random_probe(rng);
    const Probe p2 = rng.uniform() < 0.5 ? perturbed(p1, rng) : random_probe(rng);
    const double x1 = 2.0 * rng.normal();
    const double x2 = rng.uniform() < 0.5 ? x1 + 0.1 * rng.normal() : 2.0 * rng.normal();
    const MeasureStats s1 = c.stats(p1.x, p1.w), s2 = c.stats(p2.x, p2.w);

    const double f1 = c.intensity(s1, x1);
    if (f1 < bd.f_min || f1 > bd.f_max) {
      out.worst_f_excess = std::max(out.worst_f_excess, std::max(bd.f_min - f1, f1 - bd.f_max));
      fail("intensity outside declared range");
    }
    const double denom = std::abs(x1 - x2) + dkr(p1.m, p2.m);
    if (denom > 1e-9) {
      auto ratio = [&](double a, double b) { return std::abs(a - b) / denom; };
      const double rb = ratio(c.drift(s1, x1), c.drift(s2, x2));
      const double rs = ratio(c.diffusion(s1, x1), c.diffusion(s2, x2));
      const double rv = ratio(c.common_volatility(s1, x1), c.common_volatility(s2, x2));
      const double rfh =
          fh_distance(c.amplitude(s1, x1), f1, c.amplitude(s2, x2), c.intensity(s2, x2)) / denom;
      out.worst_ratio_b = std::max(out.worst_ratio_b, rb);
      out.worst_ratio_sigma = std::max(out.worst_ratio_sigma, rs);
      out.worst_ratio_varsigma = std::max(out.worst_ratio_varsigma, rv);
      out.worst_ratio_fh = std::max(out.worst_ratio_fh, rfh);
      if (rb > bd.lip_b * kSlack + 1e-12) fail("drift Lipschitz ratio exceeds declared constant");
      if (rs > bd.lip_sigma * kSlack + 1e-12) fail("diffusion Lipschitz ratio exceeds declared constant");
      if (rv > bd.lip_varsigma * kSlack + 1e-12) fail("common volatility Lipschitz ratio exceeds declared constant");
      if (rfh > bd.lip_fh * kSlack + 1e-12) fail("jump Lipschitz ratio exceeds declared constant");
    }
    // varsigma^2 = zeta^2 integral of h^2 f dm, recomputed atom by atom.
    double direct = 0.0;
    for (std::size_t k = 0; k < p1.x.size(); ++k) {
      const double h = c.amplitude(s1, p1.x[k]);
      direct += p1.w[k] * h * h * c.intensity(s1, p1.x[k]);
    }
    const double vs = c.common_volatility(s1, x1);
    const double expect = c.zeta() * c.zeta() * direct;
    const double err = std::abs(vs * vs - expect) / std::max(1e-300, std::abs(expect));
    if (expect != 0.0 || vs != 0.0) {
      out.worst_varsigma_identity = std::max(out.worst_varsigma_identity, err);
      if (err > 1e-12) fail("common volatility does not match zeta^2 integral of h^2 f");
    }
  }
  return out;
}

}  // namespace mflab
