#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mflab/measure.hpp"
#include "mflab/rng.hpp"

namespace mflab {

struct JumpAtom {
  double value;
  double probability;
};

// Law nu of the jump marks u. Either a finite support, or a continuous family
// represented by fixed quadrature nodes for generator evaluation and sampled
// exactly in simulation.
class JumpLaw {
 public:
  static JumpLaw finite(std::string name, std::vector<JumpAtom> support);
  // N(0, sd^2), with a Gauss-Hermite rule of `nodes` points for quadrature.
  static JumpLaw gaussian(double sd, std::size_t nodes = 24);
  // Built-in variants: "asymmetric" {(2, .2), (-.5, .8)}, "rademacher", "gaussian".
  static JumpLaw named(std::string_view name);

  const std::string& name() const { return name_; }
  bool has_finite_support() const { return finite_; }
  // Support points (finite laws) or quadrature nodes (continuous laws).
  std::span<const JumpAtom> nodes() const { return nodes_; }

  double moment(int p) const;
  double abs_moment(int p) const;
  // Standard deviation zeta = (integral of u^2 dnu)^{1/2}.
  double zeta() const { return std::sqrt(moment(2)); }

  double sample(Rng& rng) const;
  // Index into nodes(); finite laws only.
  std::size_t sample_index(Rng& rng) const;

 private:
  std::string name_;
  bool finite_ = true;
  double gaussian_sd_ = 0.0;
  std::vector<JumpAtom> nodes_;
  std::vector<double> cdf_;
};

// The measure enters the coefficients only through these statistics, which
// are computed once per time step.
struct MeasureStats {
  static constexpr std::size_t kMaxExtras = 2;
  double mean = 0.0;
  double h2f = 0.0;     // integral of h^2 f dm
  double f_mean = 0.0;  // integral of f dm
  std::array<double, kMaxExtras> extra{};
};

// Declared constants; checked statistically by validate_model().
struct ModelBounds {
  double f_min = 0.0;
  double f_max = 0.0;
  double lip_b = 0.0;
  double lip_sigma = 0.0;
  double lip_varsigma = 0.0;
  double lip_fh = 0.0;  // for the integral of |h1 1{z<=f1} - h2 1{z<=f2}| dz
};

// Coefficients b, sigma, varsigma, f, h as functions of (stats, x).
class CoefficientSet {
 public:
  CoefficientSet(double zeta, ModelBounds bounds) : zeta_(zeta), bounds_(bounds) {}
  virtual ~CoefficientSet() = default;

  virtual std::string_view name() const = 0;
  virtual double drift(const MeasureStats& s, double x) const = 0;
  virtual double diffusion(const MeasureStats& s, double x) const = 0;
  virtual double intensity(const MeasureStats& s, double x) const = 0;
  virtual double amplitude(const MeasureStats& s, double x) const = 0;
  // Common volatility; the default is zeta (integral of h^2 f dm)^{1/2}.
  virtual double common_volatility(const MeasureStats& s, double x) const;
  virtual bool amplitude_is_constant() const { return false; }
  virtual bool common_volatility_depends_on_x() const { return false; }

  // Model-specific integrals of fixed observables, exposed as stats.extra.
  virtual std::size_t extra_count() const { return 0; }
  virtual double extra_observable(std::size_t j, double x) const;

  // Stage one: mean and extras. Stage two: f and h at every point, from
  // which h2f and f_mean follow. weights empty means uniform.
  MeasureStats first_stage(std::span<const double> x, std::span<const double> w) const;
  MeasureStats stats(std::span<const double> x, std::span<const double> w) const;
  MeasureStats stats(const DiscreteMeasure& m) const;

  // Batched evaluation for the simulators. h may be empty when constant.
  virtual void intensity_batch(const MeasureStats& s, std::span<const double> x, std::span<double> f,
                               std::span<double> h) const;
  virtual void drift_batch(const MeasureStats& s, std::span<const double> x, std::span<double> b,
                           std::span<double> sigma) const;

  double zeta() const { return zeta_; }
  const ModelBounds& bounds() const { return bounds_; }
  bool has_positive_intensity() const { return bounds_.f_min > 0.0; }

 private:
  double zeta_;
  ModelBounds bounds_;
};

struct ModelSpec {
  std::string name;
  std::shared_ptr<const CoefficientSet> coefficients;
  JumpLaw nu;
};

// Registry: "ou_tanh", "mf_tanh", "ou", "pure_drift", "common_shift".
// nu empty selects the model default; params override named constants.
ModelSpec builtin_model(std::string_view name, std::string_view nu = {},
                        const std::map<std::string, double>& params = {});
std::vector<std::string> builtin_model_names();

struct ModelValidation {
  std::size_t probes = 0;
  double worst_f_excess = 0.0;
  double worst_ratio_b = 0.0;
  double worst_ratio_sigma = 0.0;
  double worst_ratio_varsigma = 0.0;
  double worst_ratio_fh = 0.0;
  double worst_varsigma_identity = 0.0;
  bool ok = true;
  std::string failure;
};

// Random (m, x) probes of the declared bounds and Lipschitz constants.
ModelValidation validate_model(const ModelSpec& spec, std::size_t probes, std::uint64_t seed);

}  // namespace mflab
