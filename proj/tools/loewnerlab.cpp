// Scenario runner: `run <config>`, `suite <dir>`, `list`.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "loewnerlab/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multiple SLE, Dyson driving and Gaussian free field scenario runner"};
  app.require_subcommand(1);

  std::string seed;
  std::string out;
  unsigned threads = 1;
  app.add_option("--seed", seed, "seed (decimal or 0x-hex); overrides LOEWNERLAB_SEED and the config");
  app.add_option("--out", out, "output root directory");
  app.add_option("--threads", threads, "worker threads for replica loops")->check(CLI::PositiveNumber);

  std::string config;
  auto* run = app.add_subcommand("run", "run one scenario file");
  run->add_option("config", config, "scenario JSON")->required();
  std::string dir;
  auto* suite = app.add_subcommand("suite", "run every scenario of a directory");
  suite->add_option("dir", dir, "directory of scenario JSON files")->required();
  auto* list = app.add_subcommand("list", "list experiments");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : loewnerlab::exit_validation;
  }

  loewnerlab::RunOptions options;
  options.threads = threads;
  if (!seed.empty()) options.seed_flag = seed;
  if (const char* env = std::getenv("LOEWNERLAB_SEED")) options.seed_env = std::string(env);
  if (!out.empty()) options.out_dir = out;

  try {
    if (list->parsed()) {
      for (const auto& [name, text] : loewnerlab::list_experiments()) {
        std::cout << name << "\t" << text << "\n";
      }
      return 0;
    }
    if (suite->parsed()) return loewnerlab::run_suite(dir, options, std::cout);
    const auto r = loewnerlab::run_scenario_file(config, options);
    std::cout << r.output_dir.string() << "\n";
    if (r.exit_code != 0) std::cerr << "error: " << r.error << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    // Seed parsing and filesystem errors outside a scenario.
    std::cerr << "error: " << e.what() << "\n";
    return loewnerlab::exit_validation;
  }
}
