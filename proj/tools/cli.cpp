#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "mflab/errors.hpp"
#include "mflab/experiments.hpp"
#include "mflab/generators.hpp"
#include "mflab/kernel_registry.hpp"
#include "mflab/model.hpp"
#include "mflab/rng.hpp"
#include "mflab/simulate.hpp"

#ifndef MFLAB_VERSION
#define MFLAB_VERSION "unknown"
#endif

namespace mflab::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ------------------------------------------------------------------ schema

using Check = std::function<void(const json&, const std::string&)>;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key \"" + key + "\": " + what);
}

void require_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  if (!std::isfinite(v.get<double>())) bad(key, "expected a finite number");
}

const Check number = require_number;
const Check positive = [](const json& v, const std::string& key) {
  require_number(v, key);
  if (!(v.get<double>() > 0.0)) bad(key, "expected a positive number");
};
// Parsed documents store non-negative integers as unsigned; documents built
// in code may hold them as signed.
bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}
const Check uint_ = [](const json& v, const std::string& key) {
  if (!non_negative_integer(v)) bad(key, "expected a non-negative integer");
};
const Check count = [](const json& v, const std::string& key) {
  if (!non_negative_integer(v) || v.get<std::uint64_t>() == 0) bad(key, "expected a positive integer");
};
const Check boolean = [](const json& v, const std::string& key) {
  if (!v.is_boolean()) bad(key, "expected true or false");
};
const Check string_ = [](const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected a string");
};

Check array_of(Check element) {
  return [element](const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) bad(key, "expected a non-empty array");
    for (std::size_t i = 0; i < v.size(); ++i) element(v[i], key + "[" + std::to_string(i) + "]");
  };
}

Check object_of(std::map<std::string, Check> fields, std::set<std::string> required = {}) {
  return [fields, required](const json& v, const std::string& key) {
    if (!v.is_object()) bad(key, "expected an object");
    for (auto it = v.begin(); it != v.end(); ++it) {
      const auto f = fields.find(it.key());
      if (f == fields.end()) bad(key.empty() ? it.key() : key + "." + it.key(), "unknown key");
      f->second(it.value(), key.empty() ? it.key() : key + "." + it.key());
    }
    for (const std::string& r : required)
      if (!v.contains(r)) bad(key.empty() ? r : key + "." + r, "required key is missing");
  };
}

const Check params = [](const json& v, const std::string& key) {
  if (!v.is_object()) bad(key, "expected an object of numbers");
  for (auto it = v.begin(); it != v.end(); ++it) require_number(it.value(), key + "." + it.key());
};

const Check measure = [](const json& v, const std::string& key) {
  try {
    measure_from_json(v.dump());
  } catch (const Error& e) {
    bad(key, e.what());
  }
};

// Exactly one of {"normal": [mean, sd]}, {"fixed": [x...]}, {"measure": {...}}.
const Check initial = [](const json& v, const std::string& key) {
  if (!v.is_object() || v.size() != 1) bad(key, "expected an object with exactly one of normal, fixed, measure");
  const std::string kind = v.begin().key();
  const json& body = v.begin().value();
  if (kind == "normal") {
    if (!body.is_array() || body.size() != 2) bad(key + ".normal", "expected [mean, sd]");
    number(body[0], key + ".normal[0]");
    positive(body[1], key + ".normal[1]");
  } else if (kind == "fixed") {
    array_of(number)(body, key + ".fixed");
  } else if (kind == "measure") {
    measure(body, key + ".measure");
  } else {
    bad(key + "." + kind, "unknown key");
  }
};

const Check regime = [](const json& v, const std::string& key) {
  if (!v.is_string() || (v != "diffusive" && v != "general")) bad(key, "expected \"diffusive\" or \"general\"");
};

const Check system = [](const json& v, const std::string& key) {
  if (!v.is_string() || (v != "particle" && v != "limit")) bad(key, "expected \"particle\" or \"limit\"");
};

const Check observables =
    array_of(object_of({{"functional", string_}, {"t", positive}}, {"functional", "t"}));

struct CommandSchema {
  std::map<std::string, Check> fields;
  std::set<std::string> required;
};

std::map<std::string, Check> with_common(std::map<std::string, Check> fields, bool model = true) {
  fields.emplace("command", string_);
  fields.emplace("seed", uint_);
  fields.emplace("threads", uint_);
  fields.emplace("out", string_);
  if (model) {
    fields.emplace("model", string_);
    fields.emplace("nu", string_);
    fields.emplace("params", params);
  }
  return fields;
}

const std::map<std::string, CommandSchema>& schemas() {
  static const std::map<std::string, CommandSchema> table = {
      {"simulate",
       {with_common({{"N", count},
                     {"dt", positive},
                     {"T", number},
                     {"replications", count},
                     {"initial", initial},
                     {"times", array_of(number)},
                     {"coupled", boolean}}),
        {"N"}}},
      {"simulate-limit",
       {with_common({{"M", count},
                     {"dt", positive},
                     {"T", number},
                     {"replications", count},
                     {"initial", initial},
                     {"times", array_of(number)},
                     {"coupled", boolean}}),
        {"M"}}},
      {"rate",
       {with_common({{"functional", string_},
                     {"N_list", array_of(count)},
                     {"T", positive},
                     {"dt", positive},
                     {"M", uint_},
                     {"replications", count},
                     {"initial", initial},
                     {"crn", boolean},
                     {"pilot_replications", uint_},
                     {"m_doubling_replications", uint_},
                     {"max_band_ratio", positive},
                     {"slope_band", array_of(number)}}),
        {"N_list"}}},
      {"multitime",
       {with_common({{"observables", observables},
                     {"N_list", array_of(count)},
                     {"T", positive},
                     {"dt", positive},
                     {"M", uint_},
                     {"replications", count},
                     {"initial", initial},
                     {"crn", boolean},
                     {"pilot_replications", uint_},
                     {"m_doubling_replications", uint_},
                     {"max_band_ratio", positive},
                     {"slope_band", array_of(number)}}),
        {"N_list", "observables"}}},
      {"gen-eval",
       {with_common({{"functional", string_}, {"measure", measure}, {"N", count}, {"regime", regime}}),
        {"functional", "measure", "N"}}},
      {"gen-diff",
       {with_common({{"functional", string_},
                     {"measures", array_of(measure)},
                     {"N_list", array_of(count)},
                     {"regime", regime},
                     {"max_band_ratio", positive}}),
        {"functional", "measures", "N_list"}}},
      {"dynkin",
       {with_common({{"functionals", array_of(string_)},
                     {"measure", measure},
                     {"N", count},
                     {"t", number},
                     {"dt", positive},
                     {"replications", count},
                     {"system", system},
                     {"cloud_factor", count}}),
        {}}},
      {"trotter",
       {with_common({{"functional", string_},
                     {"measure", measure},
                     {"N", count},
                     {"t", positive},
                     {"dt", positive},
                     {"runs", count},
                     {"outer_replications", count},
                     {"grid", count},
                     {"design_points", count},
                     {"sub_replications", count},
                     {"cloud_factor", count}}),
        {}}},
      {"suite",
       {with_common({{"suite", string_},
                     {"instances", uint_},
                     {"dynkin_particles", count},
                     {"dynkin_time", positive},
                     {"dynkin_dt", positive},
                     {"dynkin_replications", count}},
                    false),
        {}}},
  };
  return table;
}

// ------------------------------------------------------------------ config access

class Config {
 public:
  Config(json doc, std::optional<std::uint64_t> seed, std::optional<unsigned> threads)
      : doc_(std::move(doc)), seed_(seed), threads_(threads) {}

  std::uint64_t seed() const { return seed_ ? *seed_ : get<std::uint64_t>("seed", 0); }
  unsigned threads() const { return threads_ ? *threads_ : get<unsigned>("threads", 0); }
  bool has(const std::string& key) const { return doc_.contains(key); }
  const json& at(const std::string& key) const { return doc_.at(key); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    return doc_.contains(key) ? doc_.at(key).get<T>() : fallback;
  }
  template <class T>
  std::vector<T> list(const std::string& key) const {
    return doc_.at(key).get<std::vector<T>>();
  }

  ModelSpec model() const {
    std::map<std::string, double> p;
    if (doc_.contains("params")) p = doc_.at("params").get<std::map<std::string, double>>();
    return builtin_model(get<std::string>("model", "ou_tanh"), get<std::string>("nu", ""), p);
  }

  InitialLaw initial() const {
    if (!doc_.contains("initial")) return InitialLaw::normal(0.0, 1.0);
    const json& v = doc_.at("initial");
    const std::string kind = v.begin().key();
    const json& body = v.begin().value();
    if (kind == "normal") return InitialLaw::normal(body[0].get<double>(), body[1].get<double>());
    if (kind == "fixed") return InitialLaw::fixed(body.get<std::vector<double>>());
    return InitialLaw::sampled_from(measure_from_json(body.dump()));
  }

  DiscreteMeasure measure(const json& v) const { return measure_from_json(v.dump()); }

  // The given measure, or an empirical measure of n standard normal draws.
  DiscreteMeasure measure_or_sample(std::size_t n) const {
    if (doc_.contains("measure")) return measure(doc_.at("measure"));
    Rng rng(hash_key(seed(), 0x5a));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    return DiscreteMeasure::empirical(x);
  }

  GeneratorContext context() const {
    const Regime r = get<std::string>("regime", "diffusive") == "general" ? Regime::General : Regime::Diffusive;
    return {model(), r, {}};
  }

  const json& doc() const { return doc_; }

 private:
  json doc_;
  std::optional<std::uint64_t> seed_;
  std::optional<unsigned> threads_;
};

// ------------------------------------------------------------------ outputs

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    files_.push_back(name);
    return f;
  }
  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

struct Outcome {
  bool pass = true;
  std::string summary;
};

std::string fmt(double v) { return format_double(v); }

void write_trajectory(std::ostream& f, std::size_t rep, const Trajectory& tr, bool header) {
  if (header) f << "replication,t,particle,position\n";
  for (const Snapshot& s : tr.snapshots)
    for (std::size_t k = 0; k < s.positions.size(); ++k)
      f << rep << ',' << fmt(s.time) << ',' << k << ',' << fmt(s.positions[k]) << '\n';
}

Outcome cmd_simulate(const Config& c, Outputs& out, bool limit) {
  SimConfig sc;
  sc.dt = c.get<double>("dt", 1.0 / 256);
  sc.T = c.get<double>("T", 1.0);
  sc.seed = c.seed();
  sc.replications = c.get<std::size_t>("replications", 1);
  sc.coupled = c.get<bool>("coupled", false);
  if (limit) {
    sc.M = c.get<std::size_t>("M", 1);
    sc.N = 1;
  } else {
    sc.N = c.get<std::size_t>("N", 1);
    sc.M = sc.N;
  }
  sc.validate();
  const std::vector<double> times = c.has("times") ? c.list<double>("times") : std::vector<double>{sc.T};
  const ModelSpec model = c.model();
  const InitialLaw init = c.initial();
  std::ofstream f = out.open(limit ? "simulate_limit.csv" : "simulate.csv");
  for (std::size_t rep = 0; rep < sc.replications; ++rep) {
    const Trajectory tr = limit ? simulate_limit_process(sc, model, init, rep, times)
                                : simulate_particle_system(sc, model, init, rep, times);
    write_trajectory(f, rep, tr, rep == 0);
  }
  return {true, std::to_string(sc.replications) + " replication(s) written"};
}

RateConfig rate_config(const Config& c) {
  RateConfig rc;
  rc.model = c.model();
  rc.initial = c.initial();
  rc.N_list = c.list<std::size_t>("N_list");
  rc.T = c.get<double>("T", 1.0);
  rc.dt = c.get<double>("dt", 1.0 / 1024);
  rc.M = c.get<std::size_t>("M", 0);
  rc.replications = c.get<std::size_t>("replications", 1000);
  rc.seed = c.seed();
  rc.threads = c.threads();
  rc.crn = c.get<bool>("crn", true);
  rc.pilot_replications = c.get<std::size_t>("pilot_replications", 0);
  rc.m_doubling_replications = c.get<std::size_t>("m_doubling_replications", 0);
  return rc;
}

Outcome finish_rate(const Config& c, const RateReport& r, const RateConfig& rc, Outputs& out, const std::string& stem) {
  {
    std::ofstream f = out.open(stem + ".csv");
    write_rate_csv(f, r);
  }
  {
    std::ofstream f = out.open(stem + ".json");
    f << rate_sidecar_json(r, rc) << '\n';
  }
  const double max_ratio = c.get<double>("max_band_ratio", 3.0);
  std::vector<double> band = c.has("slope_band") ? c.list<double>("slope_band") : std::vector<double>{-1.1, -0.35};
  if (band.size() != 2 || band[0] > band[1]) throw ConfigError("config key \"slope_band\": expected [low, high]");
  bool pass = r.band_ratio <= max_ratio;
  std::ostringstream s;
  s << "band ratio " << fmt(r.band_ratio);
  if (r.fit) {
    pass = pass && r.fit->slope >= band[0] && r.fit->slope <= band[1];
    s << ", slope " << fmt(r.fit->slope);
  } else {
    s << ", slope undefined";
  }
  if (r.m_doubling) {
    pass = pass && r.m_doubling->stable;
    s << ", M-doubling " << (r.m_doubling->stable ? "stable" : "unstable");
  }
  return {pass, s.str()};
}

Outcome cmd_rate(const Config& c, Outputs& out) {
  const RateConfig rc = rate_config(c);
  const PolynomialFunctional phi = builtin_functional(c.get<std::string>("functional", "tanh_mean"));
  return finish_rate(c, rate_experiment(rc, phi), rc, out, "rate");
}

Outcome cmd_multitime(const Config& c, Outputs& out) {
  const RateConfig rc = rate_config(c);
  ObservableFactors factors;
  for (const json& o : c.at("observables"))
    factors.emplace_back(builtin_functional(o.at("functional").get<std::string>()), o.at("t").get<double>());
  return finish_rate(c, multi_time_polynomial_experiment(rc, factors), rc, out, "multitime");
}

Outcome cmd_gen_eval(const Config& c, Outputs& out) {
  const GeneratorContext ctx = c.context();
  const PolynomialFunctional g = builtin_functional(c.get<std::string>("functional", ""));
  const DiscreteMeasure m = c.measure(c.at("measure"));
  const auto n = c.get<std::size_t>("N", 1);
  const double lim = gen_limit(g, m, ctx), part = gen_particle(g, m, n, ctx);
  std::ofstream f = out.open("gen_eval.csv");
  f << "N,gen_limit,gen_particle,gen_diff\n"
    << n << ',' << fmt(lim) << ',' << fmt(part) << ',' << fmt(part - lim) << '\n';
  return {true, "gen_diff " + fmt(part - lim)};
}

Outcome cmd_gen_diff(const Config& c, Outputs& out) {
  const GeneratorContext ctx = c.context();
  const PolynomialFunctional g = builtin_functional(c.get<std::string>("functional", ""));
  const auto ns = c.list<std::size_t>("N_list");
  // Without max_band_ratio the command only reports.
  const double max_ratio = c.get<double>("max_band_ratio", std::numeric_limits<double>::infinity());
  std::ofstream f = out.open("gen_diff.csv");
  f << "measure,N,gen_diff,scaled\n";
  bool pass = true;
  std::size_t i = 0;
  for (const json& mj : c.at("measures")) {
    const DiscreteMeasure m = c.measure(mj);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t n : ns) {
      const double d = gen_diff(g, m, n, ctx);
      const double scaled = std::abs(d) * std::sqrt(static_cast<double>(n));
      lo = std::min(lo, scaled);
      hi = std::max(hi, scaled);
      f << i << ',' << n << ',' << fmt(d) << ',' << fmt(scaled) << '\n';
    }
    if (c.has("max_band_ratio")) pass = pass && lo > 0.0 && hi / lo <= max_ratio;
    ++i;
  }
  return {pass, std::to_string(i) + " measure(s)"};
}

Outcome cmd_dynkin(const Config& c, Outputs& out) {
  const GeneratorContext ctx = c.context();
  const auto n = c.get<std::size_t>("N", 64);
  const DiscreteMeasure m = c.measure_or_sample(n);
  const double t = c.get<double>("t", 0.5);
  DiagnosticResources res;
  res.dt = c.get<double>("dt", 1.0 / 512);
  res.replications = c.get<std::size_t>("replications", 1000);
  res.seed = c.seed();
  res.threads = c.threads();
  res.cloud_factor = c.get<std::size_t>("cloud_factor", res.cloud_factor);
  const SystemKind which = c.get<std::string>("system", "particle") == "limit" ? SystemKind::Limit : SystemKind::Particle;
  const std::vector<std::string> ids = c.has("functionals") ? c.list<std::string>("functionals")
                                                            : std::vector<std::string>{"mean", "second_moment",
                                                                                       "mean_squared"};
  std::vector<DiagnosticRow> rows;
  bool pass = true;
  for (const std::string& id : ids) {
    const DynkinResult r = dynkin_residual(builtin_functional(id), m, n, t, which, ctx, res);
    rows.push_back({"dynkin_" + id, n, t, r.residual, r.std_error, r.bound, r.pass});
    pass = pass && r.pass;
  }
  std::ofstream f = out.open("dynkin.csv");
  write_diagnostic_csv(f, rows);
  return {pass, std::to_string(rows.size()) + " residual(s)"};
}

Outcome cmd_trotter(const Config& c, Outputs& out) {
  const GeneratorContext ctx = c.context();
  const auto n = c.get<std::size_t>("N", 32);
  const DiscreteMeasure m = c.measure_or_sample(n);
  const double t = c.get<double>("t", 0.2);
  DiagnosticResources res;
  res.dt = c.get<double>("dt", 1.0 / 640);
  res.seed = c.seed();
  res.threads = c.threads();
  res.cloud_factor = c.get<std::size_t>("cloud_factor", res.cloud_factor);
  TrotterBudget budget;
  budget.outer_replications = c.get<std::size_t>("outer_replications", budget.outer_replications);
  budget.grid = c.get<std::size_t>("grid", budget.grid);
  budget.design_points = c.get<std::size_t>("design_points", budget.design_points);
  budget.sub_replications = c.get<std::size_t>("sub_replications", budget.sub_replications);
  const TrotterSeries series = trotter_series(builtin_functional(c.get<std::string>("functional", "mean")), m, n, t,
                                              ctx, res, budget, c.get<std::size_t>("runs", 1));
  std::vector<DiagnosticRow> rows;
  for (std::size_t k = 0; k < series.runs.size(); ++k) {
    const TrotterRun& run = series.runs[k];
    auto add = [&](const std::string& id, const TrotterResult& r) {
      const double se = std::hypot(r.lhs_std_error, r.rhs_std_error);
      rows.push_back({id, n, t, r.lhs - r.rhs, se, 3.0 * se, r.agree()});
    };
    add("trotter_run" + std::to_string(k), run.result);
    if (run.retry) add("trotter_run" + std::to_string(k) + "_retry", *run.retry);
  }
  std::ofstream f = out.open("trotter.csv");
  write_diagnostic_csv(f, rows);
  return {series.pass(), std::to_string(series.runs.size()) + " run(s)"};
}

Outcome cmd_suite(const Config& c, const std::string& name, Outputs& out, std::ostream& err) {
  SuiteConfig sc;
  sc.seed = c.seed();
  sc.threads = c.threads();
  if (c.has("instances")) sc.instances = c.get<std::size_t>("instances", 0);
  sc.dynkin_particles = c.get<std::size_t>("dynkin_particles", sc.dynkin_particles);
  sc.dynkin_time = c.get<double>("dynkin_time", sc.dynkin_time);
  sc.dynkin_dt = c.get<double>("dynkin_dt", sc.dynkin_dt);
  sc.dynkin_replications = c.get<std::size_t>("dynkin_replications", sc.dynkin_replications);
  const SuiteReport r = run_suite(name, sc);
  for (const std::string& w : r.warnings) err << "warning: " << w << '\n';
  std::ofstream f = out.open("suite_" + name + ".csv");
  write_suite_csv(f, r);
  const auto failed = std::count_if(r.rows.begin(), r.rows.end(), [](const SuiteRow& row) { return !row.pass; });
  return {r.pass(), std::to_string(r.rows.size()) + " row(s), " + std::to_string(failed) + " failed"};
}

void write_manifest(Outputs& out, const std::string& command, const std::vector<std::string>& argv,
                    const Config& c, double wall, const Outcome& outcome) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = c.doc();
  j["seed"] = c.seed();
  j["threads"] = c.threads();
  j["version"] = MFLAB_VERSION;
  j["compiler"] = __VERSION__;
  j["wall_time_seconds"] = wall;
  j["pass"] = outcome.pass;
  j["outputs"] = out.files();
  std::ofstream f(out.dir() / "manifest.json", std::ios::binary);
  f << j.dump(2) << '\n';
}

}  // namespace

std::vector<std::string> subcommands() {
  std::vector<std::string> out;
  for (const auto& [name, schema] : schemas()) out.push_back(name);
  out.push_back("validate-config");
  return out;
}

json load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

void validate_config(const json& config, std::string_view command) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  std::string cmd(command);
  if (config.contains("command")) {
    if (!config["command"].is_string()) bad("command", "expected a string");
    const std::string declared = config["command"].get<std::string>();
    if (!cmd.empty() && declared != cmd) bad("command", "config is for \"" + declared + "\", not \"" + cmd + "\"");
    cmd = declared;
  }
  if (cmd.empty()) throw ConfigError("config has no \"command\" key naming its subcommand");
  const auto it = schemas().find(cmd);
  if (it == schemas().end()) throw ConfigError("unknown command \"" + cmd + "\"");
  object_of(it->second.fields, it->second.required)(config, "");
  // Registry lookups are part of validation so that errors surface before
  // any computation.
  if (config.contains("model") || config.contains("nu") || config.contains("params")) {
    std::map<std::string, double> p;
    if (config.contains("params")) p = config["params"].get<std::map<std::string, double>>();
    builtin_model(config.value("model", std::string("ou_tanh")), config.value("nu", std::string()), p);
  }
  for (const char* key : {"functional"})
    if (config.contains(key)) builtin_functional(config[key].get<std::string>());
  if (config.contains("functionals"))
    for (const json& id : config["functionals"]) builtin_functional(id.get<std::string>());
  if (config.contains("observables"))
    for (const json& o : config["observables"]) builtin_functional(o["functional"].get<std::string>());
  if (config.contains("suite")) {
    const auto names = suite_names();
    if (std::find(names.begin(), names.end(), config["suite"].get<std::string>()) == names.end())
      bad("suite", "unknown suite");
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field particle systems: simulation, generators and convergence experiments", "mflab"};
  app.require_subcommand(1);
  std::string config_path, positional;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::map<std::string, CLI::App*> subs;
  static const std::map<std::string, std::string> about = {
      {"simulate", "Simulate the N-particle system and write positions"},
      {"simulate-limit", "Simulate an M-particle cloud of the limit process"},
      {"rate", "Weak error of a one-time observable across an N ladder"},
      {"multitime", "Weak error of a product of observables at several times"},
      {"gen-eval", "Evaluate both generators on a discrete measure"},
      {"gen-diff", "Generator difference across N on fixed measures"},
      {"dynkin", "Dynkin residual of functionals along simulated paths"},
      {"trotter", "Trotter-Kato identity as a Monte Carlo diagnostic"},
      {"suite", "Run a property suite: derivative, taylor, metric, generator, dynkin"},
  };
  for (const auto& [name, schema] : schemas()) {
    CLI::App* s = app.add_subcommand(name, about.at(name));
    s->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "Master seed (overrides the config)");
    s->add_option("--threads", threads, "Worker threads; 0 uses all cores");
    s->add_option("--out", out_dir, "Output directory (default: the config's out, else .)");
    if (name == "suite") s->add_option("name", positional, "Suite name")->check(CLI::IsMember(suite_names()));
    subs[name] = s;
  }
  CLI::App* validate = app.add_subcommand("validate-config", "Check a config against its command's schema");
  validate->add_option("path", config_path, "JSON config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  std::string command;
  for (const auto& [name, s] : subs)
    if (s->parsed()) command = name;

  try {
    if (validate->parsed()) {
      validate_config(load_config(config_path));
      out << "config ok\n";
      return kExitOk;
    }
    json doc = config_path.empty() ? json::object() : load_config(config_path);
    validate_config(doc, command);
    if (command == "suite") {
      if (positional.empty() && doc.contains("suite")) positional = doc["suite"].get<std::string>();
      if (positional.empty()) throw ConfigError("suite needs a name");
    }
    const std::string dir = out_dir ? *out_dir : doc.value("out", std::string("."));
    const Config c(std::move(doc), seed, threads);
    Outputs outputs{fs::path(dir)};

    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    if (command == "simulate")
      outcome = cmd_simulate(c, outputs, false);
    else if (command == "simulate-limit")
      outcome = cmd_simulate(c, outputs, true);
    else if (command == "rate")
      outcome = cmd_rate(c, outputs);
    else if (command == "multitime")
      outcome = cmd_multitime(c, outputs);
    else if (command == "gen-eval")
      outcome = cmd_gen_eval(c, outputs);
    else if (command == "gen-diff")
      outcome = cmd_gen_diff(c, outputs);
    else if (command == "dynkin")
      outcome = cmd_dynkin(c, outputs);
    else if (command == "trotter")
      outcome = cmd_trotter(c, outputs);
    else
      outcome = cmd_suite(c, positional, outputs, err);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(outputs, command, std::vector<std::string>(argv, argv + argc), c, wall, outcome);
    out << command << ": " << outcome.summary << (outcome.pass ? " [pass]" : " [FAIL]") << '\n';
    return outcome.pass ? kExitOk : kExitPropertyFailure;
  } catch (const UnderpoweredExperiment& e) {
    err << "error: " << e.what() << '\n';
    return kExitPropertyFailure;
  } catch (const NumericalBlowup& e) {
    err << "error: " << e.what() << '\n';
    return kExitPropertyFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace mflab::cli
