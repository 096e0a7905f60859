// End-to-end runs through the scenario runner and the loewnerlab executable.

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "loewnerlab/errors.hpp"
#include "loewnerlab/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace loewnerlab;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "loewnerlab_integration" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunOptions into(const fs::path& dir) {
  RunOptions o;
  o.out_dir = dir;
  return o;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json drift_audit_config() {
  return {{"name", "audit"}, {"experiment", "drift-audit"}, {"mode", "welding"},
          {"kappa", 1.0},    {"x", {-1.0, 1.0}},            {"point", {0.5, 2.0}}};
}

json path_config(std::uint64_t seed) {
  return {{"name", "path"}, {"experiment", "simulate"}, {"model", "dyson"}, {"beta", 4.0},
          {"kappa", 2.0},   {"x0", {-1.0, 0.0, 1.0}},   {"T", 0.1},         {"dt", 1e-3},
          {"seed", seed}};
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Scenario, DriftAuditWritesReportAndManifest) {
  const auto dir = scratch("audit");
  const auto r = run_scenario(drift_audit_config(), into(dir));
  ASSERT_EQ(r.exit_code, exit_ok) << r.error;
  EXPECT_EQ(r.output_dir, dir / "audit");
  const json audit = read_json(r.output_dir / "audit.json");
  EXPECT_LT(audit["residual"].get<double>(), 1e-10);
  const json m = read_json(r.output_dir / "manifest.json");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["seed_source"], "default");
  EXPECT_EQ(m["artifacts"], json::array({"audit.json"}));
  EXPECT_TRUE(m["versions"].contains("eigen"));
}

TEST(Scenario, MissingKappaIsAValidationFailure) {
  const auto dir = scratch("missing");
  auto config = drift_audit_config();
  config.erase("kappa");
  const auto r = run_scenario(config, into(dir));
  EXPECT_EQ(r.exit_code, exit_validation);
  EXPECT_NE(r.error.find("kappa"), std::string::npos);
  EXPECT_TRUE(r.artifacts.empty());
  EXPECT_EQ(r.output_dir, dir / "failed" / "audit");
  EXPECT_FALSE(fs::exists(dir / "audit"));
  const json m = read_json(r.output_dir / "manifest.json");
  EXPECT_EQ(m["exit_code"], exit_validation);
  EXPECT_EQ(m["status"], "validation_error");
}

TEST(Scenario, UnknownKeysAndExperimentsAreRejected) {
  const auto dir = scratch("unknown");
  auto config = drift_audit_config();
  config["kapa"] = 1.0;
  EXPECT_EQ(run_scenario(config, into(dir)).exit_code, exit_validation);
  config = drift_audit_config();
  config["experiment"] = "nope";
  EXPECT_EQ(run_scenario(config, into(dir)).exit_code, exit_validation);
  EXPECT_EQ(run_scenario(json::array(), into(dir)).exit_code, exit_validation);
}

TEST(Scenario, CapacityOfThreeSlits) {
  const auto dir = scratch("capacity");
  json config{{"name", "cap"}, {"experiment", "capacity"}, {"model", "dyson"}, {"beta", 4.0},
              {"kappa", 2.0},  {"x0", {-1.0, 0.0, 1.0}},  {"T", 0.25},        {"dt", 1e-3},
              {"seed", 7}};
  const auto r = run_scenario(config, into(dir));
  ASSERT_EQ(r.exit_code, exit_ok) << r.error;
  const json c = read_json(r.output_dir / "capacity.json");
  EXPECT_NEAR(c["capacity"].get<double>(), 1.5, 0.015);
  EXPECT_EQ(c["expected"].get<double>(), 1.5);
}

TEST(Scenario, SeedPrecedence) {
  RunOptions o;
  const json with_seed{{"seed", 5}};
  EXPECT_EQ(resolve_seed(o, json::object()).source, "default");
  EXPECT_EQ(resolve_seed(o, json::object()).value, 0u);
  EXPECT_EQ(resolve_seed(o, with_seed).source, "config");
  EXPECT_EQ(resolve_seed(o, with_seed).value, 5u);
  o.seed_env = "0x10";
  EXPECT_EQ(resolve_seed(o, with_seed).source, "env");
  EXPECT_EQ(resolve_seed(o, with_seed).value, 16u);
  o.seed_flag = "9";
  EXPECT_EQ(resolve_seed(o, with_seed).source, "flag");
  EXPECT_EQ(resolve_seed(o, with_seed).value, 9u);
  EXPECT_EQ(resolve_seed(RunOptions{}, json{{"seed", "0xff"}}).value, 255u);
  EXPECT_THROW(resolve_seed(RunOptions{}, json{{"seed", -1}}), ValidationError);
}

TEST(Scenario, RerunIsByteIdentical) {
  const auto a = run_scenario(path_config(3), into(scratch("rerun_a")));
  const auto b = run_scenario(path_config(3), into(scratch("rerun_b")));
  const auto c = run_scenario(path_config(4), into(scratch("rerun_c")));
  ASSERT_EQ(a.exit_code, exit_ok) << a.error;
  const std::string pa = read_text(a.output_dir / "path.csv");
  EXPECT_FALSE(pa.empty());
  EXPECT_EQ(pa, read_text(b.output_dir / "path.csv"));
  EXPECT_NE(pa, read_text(c.output_dir / "path.csv"));
}

TEST(Scenario, FieldFailureIsNumerical) {
  const auto dir = scratch("walkout");
  json config{{"name", "walkout"},
              {"experiment", "flowline"},
              {"field",
               {{"kind", "constant"},
                {"value", 0.0},
                {"mollifier", {{"window", {{-0.2, 0.0}, {0.2, 0.4}}}, {"sigma", 0.1}}}}},
              {"chi", 1.0},
              {"start", {0.0, 0.2}},
              {"dt", 0.01},
              {"max_steps", 1000}};
  const auto r = run_scenario(config, into(dir));
  EXPECT_EQ(r.exit_code, exit_numerical);
  EXPECT_EQ(r.output_dir, dir / "failed" / "walkout");
  EXPECT_EQ(read_json(r.output_dir / "manifest.json")["status"], "numerical_error");
}

TEST(Scenario, SuiteReportsWorstExitCode) {
  const auto dir = scratch("suite");
  fs::create_directories(dir / "in");
  std::ofstream(dir / "in" / "a.json") << drift_audit_config().dump();
  auto bad = drift_audit_config();
  bad["name"] = "bad";
  bad.erase("kappa");
  std::ofstream(dir / "in" / "b.json") << bad.dump();
  std::ofstream(dir / "in" / "c.json") << "{ not json";
  std::ostringstream log;
  EXPECT_EQ(run_suite(dir / "in", into(dir / "out"), log), exit_validation);
  const std::string text = log.str();
  EXPECT_NE(text.find("ok   a.json"), std::string::npos);
  EXPECT_NE(text.find("FAIL b.json"), std::string::npos);
  EXPECT_NE(text.find("FAIL c.json"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "audit" / "audit.json"));
}

TEST(Scenario, ListsEveryExperiment) {
  std::vector<std::string> names;
  for (const auto& [name, text] : list_experiments()) {
    names.push_back(name);
    EXPECT_FALSE(text.empty());
  }
  for (const char* e : {"simulate", "trace", "capacity", "drift-audit", "cross-variation",
                        "stationarity", "cft-check", "flowline", "boundary-length"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), e), names.end()) << e;
  }
}

TEST(Scenario, FlowlineJumpReport) {
  const auto dir = scratch("jump");
  json config{{"name", "jump"},
              {"experiment", "flowline"},
              {"kappa", 2.0},
              {"jump",{{"kappa", 2.0}, {"N", 3}, {"anchors", {-1.0, 0.0, 1.0}}}}};
  const auto r = run_scenario(config, into(dir));
  ASSERT_EQ(r.exit_code, exit_ok) << r.error;
  const json j = read_json(r.output_dir / "jump.json");
  EXPECT_LT(j["max_plateau_error"].get<double>(), 1e-12);
}

TEST(Cli, ExitCodesAndSeedSources) {
  const auto dir = scratch("cli");
  const std::string exe = LOEWNERLAB_CLI;
  std::ofstream(dir / "audit.json") << drift_audit_config().dump();
  auto bad = drift_audit_config();
  bad.erase("kappa");
  std::ofstream(dir / "bad.json") << bad.dump();
  const std::string out = " --out " + (dir / "out").string();

  EXPECT_EQ(shell(exe + " list"), 0);
  EXPECT_EQ(shell(exe + " frobnicate"), 2);
  EXPECT_EQ(shell(exe + out + " run " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(shell(exe + out + " run " + (dir / "bad.json").string()), 2);

  EXPECT_EQ(shell(exe + out + " --seed 0x2a run " + (dir / "audit.json").string()), 0);
  json m = read_json(dir / "out" / "audit" / "manifest.json");
  EXPECT_EQ(m["seed"], 42);
  EXPECT_EQ(m["seed_source"], "flag");

  EXPECT_EQ(shell("LOEWNERLAB_SEED=17 " + exe + out + " run " + (dir / "audit.json").string()), 0);
  m = read_json(dir / "out" / "audit" / "manifest.json");
  EXPECT_EQ(m["seed"], 17);
  EXPECT_EQ(m["seed_source"], "env");

  EXPECT_EQ(shell(exe + out + " suite " + dir.string()), 2);
}
