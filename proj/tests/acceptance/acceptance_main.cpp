// Acceptance run: one pass/fail line per criterion. Exit status is nonzero
// when any selected criterion fails.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mflab/cloud.hpp"
#include "mflab/common_noise.hpp"
#include "mflab/experiments.hpp"
#include "mflab/kernel_registry.hpp"
#include "mflab/simulate.hpp"

namespace fs = std::filesystem;
using namespace mflab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

unsigned g_threads = 0;

// Passes when every row whose property starts with prefix passes; returns
// the row count and the failures.
Verdict suite_rows(const SuiteReport& r, const std::string& prefix = "") {
  std::size_t rows = 0, failures = 0;
  for (const SuiteRow& row : r.rows) {
    if (row.property.rfind(prefix, 0) != 0) continue;
    ++rows;
    failures += !row.pass;
  }
  return {rows > 0 && failures == 0, std::to_string(rows) + " checks, " + std::to_string(failures) + " violations"};
}

SuiteReport suite(const std::string& name, std::uint64_t seed) {
  SuiteConfig c;
  c.seed = seed;
  c.threads = g_threads;
  return run_suite(name, c);
}

Verdict quadratic_exactness() {
  const SuiteReport r = suite("generator", 11);
  return suite_rows(r, "quadratic_exactness");
}

Verdict rate() {
  RateConfig c;
  c.model = builtin_model("ou_tanh", "asymmetric");
  c.N_list = {64, 128, 256, 512, 1024};
  c.T = 1.0;
  c.dt = 1.0 / 1024;
  c.M = 1024;
  c.replications = 20000;
  c.m_doubling_replications = 1000;
  c.seed = 2024;
  c.threads = g_threads;
  const RateReport r = rate_experiment(c, builtin_functional("tanh_mean"));
  const bool band = r.band_ratio <= 3.0;
  const bool slope = r.fit && r.fit->slope >= -1.1 && r.fit->slope <= -0.35;
  const bool stable = r.m_doubling && r.m_doubling->stable;
  std::string d = "band ratio " + fmt(r.band_ratio) + ", slope " + (r.fit ? fmt(r.fit->slope) : "n/a") + " over " +
                  std::to_string(r.fit ? r.fit->points : 0) + " rows, M-doubling " +
                  (stable ? "stable" : "unstable");
  for (const RateRow& row : r.rows) d += "; N=" + std::to_string(row.N) + " e*sqrtN=" + fmt(row.scaled_error);
  return {band && slope && stable, d};
}

Verdict generator_gap() {
  const SuiteReport r = suite("generator", 11);
  const Verdict band = suite_rows(r, "cubic_gap_band"), decay = suite_rows(r, "cubic_gap_decay");
  return {band.pass && decay.pass, "band: " + band.detail + "; decay: " + decay.detail};
}

Verdict dynkin() {
  const SuiteReport r = suite("dynkin", 5);
  Verdict v = suite_rows(r);
  for (const SuiteRow& row : r.rows) v.detail += "; " + row.property + "=" + fmt(row.value) + " (bound " + fmt(row.reference) + ")";
  return v;
}

Verdict trotter() {
  const GeneratorContext ctx{builtin_model("ou_tanh"), Regime::Diffusive, {}};
  Rng rng(3);
  std::vector<double> x(32);
  for (double& v : x) v = rng.normal();
  DiagnosticResources res;
  res.dt = 1.0 / 640;
  res.seed = 8;
  res.threads = g_threads;
  const TrotterSeries s =
      trotter_series(builtin_functional("mean"), DiscreteMeasure::empirical(x), 32, 0.2, ctx, res, TrotterBudget{}, 5);
  std::size_t agree = 0, retried = 0;
  for (const TrotterRun& r : s.runs) {
    agree += r.agree();
    retried += r.retry.has_value();
  }
  return {s.pass(), std::to_string(agree) + "/5 runs agree, " + std::to_string(retried) + " re-run"};
}

// Fast global-offset cloud against per-particle jumps, then byte-identity of
// CLI outputs across repeated runs and thread counts.
Verdict simulation() {
  std::size_t mismatches = 0;
  for (const char* name : {"common_shift", "ou_tanh", "mf_tanh"}) {
    const ModelSpec model = builtin_model(name);
    for (std::size_t n = 1; n <= 16; ++n) {
      const double dt = 1.0 / 64;
      std::vector<double> x0(n);
      for (std::size_t k = 0; k < n; ++k) x0[k] = 0.25 * static_cast<double>(k) - 1.0;
      DirectJumpSource ja(model.nu, Rng(n, 0, StreamRole::Jumps, n)), jb(model.nu, Rng(n, 0, StreamRole::Jumps, n));
      ParticleStepper sa(model, n, dt, 1, n, 0, ja), sb(model, n, dt, 1, n, 0, jb);
      ParticleCloud fast(x0);
      NaiveCloud naive(x0);
      std::vector<double> a(n), b(n);
      for (std::size_t step = 0; step < 1000; ++step) {
        sa.step(fast, step);
        sb.step(naive, step);
        fast.positions(a);
        naive.positions(b);
        if (a != b) {
          ++mismatches;
          break;
        }
      }
    }
  }

  const fs::path root = fs::temp_directory_path() / "mflab_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  struct Job {
    std::string command;
    nlohmann::json config;
    std::vector<std::string> files;
  };
  using nlohmann::json;
  const std::vector<Job> jobs = {
      {"simulate", json{{"model", "mf_tanh"}, {"N", 16}, {"dt", 0.0625}, {"T", 1.0}, {"replications", 4}}, {"simulate.csv"}},
      {"simulate-limit", json{{"model", "ou_tanh"}, {"M", 32}, {"dt", 0.0625}, {"T", 1.0}, {"replications", 4}},
       {"simulate_limit.csv"}},
      {"rate",
       json{{"model", "ou_tanh"}, {"functional", "tanh_mean"}, {"N_list", {8, 16}}, {"T", 0.5}, {"dt", 0.0625},
            {"M", 32}, {"replications", 200}, {"pilot_replications", 200}},
       {"rate.csv", "rate.json"}},
      {"multitime",
       json{{"model", "mf_tanh"},
            {"observables", {{{"functional", "tanh_mean"}, {"t", 0.25}}, {{"functional", "mean"}, {"t", 0.5}}}},
            {"N_list", {8, 16}}, {"T", 0.5}, {"dt", 0.0625}, {"M", 32}, {"replications", 200},
            {"pilot_replications", 200}},
       {"multitime.csv", "multitime.json"}},
      {"gen-diff",
       json{{"functional", "mean_cubed"}, {"measures", {{{"atoms", {{-1.0, 0.5}, {2.0, 0.5}}}}}},
            {"N_list", {100, 1000}}},
       {"gen_diff.csv"}},
      {"dynkin",
       json{{"functionals", {"mean"}}, {"measure", {{"atoms", {{-1.0, 0.5}, {1.0, 0.5}}}}}, {"N", 8}, {"t", 0.25},
            {"dt", 0.03125}, {"replications", 200}},
       {"dynkin.csv"}},
      {"suite", json{{"suite", "metric"}, {"instances", 20}}, {"suite_metric.csv"}},
  };
  std::size_t differing = 0, failed_runs = 0;
  std::string which;
  for (const Job& job : jobs) {
    const fs::path cfg = root / (job.command + ".json");
    std::ofstream(cfg) << job.config.dump();
    std::string outputs[3];
    const char* threads[3] = {"1", "1", "3"};
    for (int k = 0; k < 3; ++k) {
      const fs::path dir = root / (job.command + std::to_string(k));
      const std::vector<std::string> args = {"mflab",    job.command, "--config", cfg.string(), "--seed", "17",
                                             "--threads", threads[k],  "--out",    dir.string()};
      std::vector<const char*> argv;
      for (const std::string& a : args) argv.push_back(a.c_str());
      std::ostringstream out, err;
      if (cli::run(static_cast<int>(argv.size()), argv.data(), out, err) != cli::kExitOk) {
        ++failed_runs;
        which += " " + job.command + "(" + err.str() + ")";
      }
      for (const std::string& f : job.files) {
        std::ifstream in(dir / f, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        outputs[k] += s.str();
      }
    }
    if (outputs[0].empty() || outputs[0] != outputs[1] || outputs[0] != outputs[2]) {
      ++differing;
      which += " " + job.command;
    }
  }
  fs::remove_all(root);
  const bool pass = mismatches == 0 && differing == 0 && failed_runs == 0;
  return {pass, std::to_string(mismatches) + " offset/naive mismatches over 48 systems; " +
                    std::to_string(differing) + "/" + std::to_string(jobs.size()) + " commands with differing outputs" +
                    (which.empty() ? "" : ":" + which)};
}

struct Criterion {
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria", "mflab_acceptance"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--threads", g_threads, "Worker threads; 0 uses all cores");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"quadratic generator exactness", quadratic_exactness},
      {"weak-error rate", rate},
      {"generator-difference scaling", generator_gap},
      {"Dynkin residual", dynkin},
      {"derivative suite", [] { return suite_rows(suite("derivative", 1)); }},
      {"Taylor suite", [] { return suite_rows(suite("taylor", 2)); }},
      {"metric suite", [] { return suite_rows(suite("metric", 3)); }},
      {"Trotter diagnostic", trotter},
      {"simulation correctness", simulation},
  };
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<std::size_t>(only) != k + 1) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << k + 1 << " (" << criteria[k].name << "): " << v.detail
              << " [" << fmt(secs) << " s]" << std::endl;
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
