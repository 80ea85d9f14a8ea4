#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mflab/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mflab;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mflab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const json& j, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "mflab");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

json rate_config() {
  return {{"command", "rate"}, {"model", "ou_tanh"},     {"functional", "tanh_mean"}, {"N_list", {4, 8}},
          {"T", 0.5},          {"dt", 0.0625},           {"M", 16},                   {"replications", 64},
          {"pilot_replications", 64}, {"seed", 3}};
}

}  // namespace

TEST(CliSchema, AcceptsWellFormedConfigs) {
  EXPECT_NO_THROW(cli::validate_config(rate_config()));
  EXPECT_NO_THROW(cli::validate_config(json{{"N", 8}, {"initial", {{"normal", {0.0, 1.0}}}}}, "simulate"));
  EXPECT_NO_THROW(cli::validate_config(
      json{{"functional", "mean"}, {"N", 4}, {"measure", {{"atoms", {{0.0, 0.5}, {1.0, 0.5}}}}}}, "gen-eval"));
}

TEST(CliSchema, RejectsBadConfigs) {
  json j = rate_config();
  j["bogus"] = 1;
  EXPECT_THROW(cli::validate_config(j), ConfigError);
  j = rate_config();
  j.erase("N_list");
  EXPECT_THROW(cli::validate_config(j), ConfigError);
  j = rate_config();
  j["replications"] = "many";
  EXPECT_THROW(cli::validate_config(j), ConfigError);
  j = rate_config();
  j["dt"] = -0.1;
  EXPECT_THROW(cli::validate_config(j), ConfigError);
  j = rate_config();
  j["model"] = "no_such_model";
  EXPECT_THROW(cli::validate_config(j), Error);
  j = rate_config();
  j["functional"] = "no_such_functional";
  EXPECT_THROW(cli::validate_config(j), Error);
  EXPECT_THROW(cli::validate_config(json{{"N", 8}, {"initial", {{"normal", {0.0}}}}}, "simulate"), ConfigError);
  EXPECT_THROW(cli::validate_config(json::object(), "no-such-command"), ConfigError);
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}), cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), cli::kExitUsage);
  json j = rate_config();
  j["bogus"] = true;
  EXPECT_EQ(run({"rate", "--config", write_config(j), "--out", dir_.string()}), cli::kExitUsage);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);
  EXPECT_EQ(run({"--help"}), cli::kExitOk);
}

TEST_F(CliTest, ValidateConfigSubcommand) {
  EXPECT_EQ(run({"validate-config", write_config(rate_config())}), cli::kExitOk);
  json j = rate_config();
  j.erase("N_list");
  EXPECT_EQ(run({"validate-config", write_config(j)}), cli::kExitUsage);
}

TEST_F(CliTest, GenEvalWritesCsvAndManifest) {
  const json j = {{"model", "ou"}, {"functional", "mean"}, {"N", 4}, {"measure", {{"atoms", {{0.0, 0.5}, {1.0, 0.5}}}}}};
  ASSERT_EQ(run({"gen-eval", "--config", write_config(j), "--out", dir_.string()}), cli::kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "gen_eval.csv"));
  const json manifest = json::parse(slurp(dir_ / "manifest.json"));
  EXPECT_EQ(manifest["command"], "gen-eval");
  EXPECT_TRUE(manifest["pass"].get<bool>());
  EXPECT_TRUE(manifest.contains("seed"));
  EXPECT_TRUE(manifest.contains("version"));
}

TEST_F(CliTest, OutputsAreReproducibleAcrossRunsAndThreads) {
  const std::string cfg = write_config(rate_config());
  const fs::path a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  ASSERT_EQ(run({"rate", "--config", cfg, "--out", a.string(), "--threads", "1"}), cli::kExitOk) << err_.str();
  ASSERT_EQ(run({"rate", "--config", cfg, "--out", b.string(), "--threads", "1"}), cli::kExitOk);
  ASSERT_EQ(run({"rate", "--config", cfg, "--out", c.string(), "--threads", "3"}), cli::kExitOk);
  EXPECT_EQ(slurp(a / "rate.csv"), slurp(b / "rate.csv"));
  EXPECT_EQ(slurp(a / "rate.csv"), slurp(c / "rate.csv"));
  EXPECT_EQ(slurp(a / "rate.json"), slurp(c / "rate.json"));
  // A tiny ladder may legitimately miss the rate band; only the bytes matter here.
  ASSERT_NE(run({"rate", "--config", cfg, "--out", c.string(), "--seed", "4"}), cli::kExitUsage);
  EXPECT_NE(slurp(a / "rate.csv"), slurp(c / "rate.csv"));
}

TEST_F(CliTest, SimulateCsvIsReproducible) {
  const json j = {{"model", "mf_tanh"}, {"N", 6}, {"dt", 0.125}, {"T", 0.5}, {"replications", 2}, {"seed", 1}};
  const std::string cfg = write_config(j);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", (dir_ / "a").string()}), cli::kExitOk) << err_.str();
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", (dir_ / "b").string(), "--threads", "2"}), cli::kExitOk);
  const std::string s = slurp(dir_ / "a" / "simulate.csv");
  EXPECT_EQ(s.rfind("replication,t,particle,position\n", 0), 0u);
  EXPECT_EQ(s, slurp(dir_ / "b" / "simulate.csv"));
}

TEST_F(CliTest, UnderpoweredExperimentExitsWithOne) {
  json j = rate_config();
  j["model"] = "ou";
  j["N_list"] = {4, 64};
  j["M"] = 64;
  j["replications"] = 400;
  j["pilot_replications"] = 100;
  EXPECT_EQ(run({"rate", "--config", write_config(j), "--out", dir_.string()}), cli::kExitPropertyFailure);
  EXPECT_NE(err_.str().find("error"), std::string::npos);
}

TEST_F(CliTest, SuiteRuns) {
  const json j = {{"instances", 2}, {"seed", 2}};
  EXPECT_EQ(run({"suite", "metric", "--config", write_config(j), "--out", dir_.string()}), cli::kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "suite_metric.csv"));
  EXPECT_EQ(run({"suite", "nope", "--out", dir_.string()}), cli::kExitUsage);
}
