#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "loewnerlab/field.hpp"

namespace loewnerlab {

/// Exit statuses of a scenario run.
enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_numerical = 3 };

struct RunOptions {
  /// --seed flag; wins over the environment and the config.
  std::optional<std::string> seed_flag;
  /// Value of LOEWNERLAB_SEED; wins over the config.
  std::optional<std::string> seed_env;
  /// --out flag; replaces the config's "output" directory.
  std::optional<std::filesystem::path> out_dir;
  unsigned threads = 1;
};

struct ResolvedSeed {
  std::uint64_t value = 0;
  std::string source;  ///< "flag", "env", "config" or "default"
};

/// Seed precedence: flag > env > config > 0.
ResolvedSeed resolve_seed(const RunOptions& options, const nlohmann::json& config);

struct RunResult {
  int exit_code = exit_ok;
  std::string error;
  /// Directory holding the manifest and the artifacts.
  std::filesystem::path output_dir;
  nlohmann::json manifest;
  /// Artifact names in the order they were produced.
  std::vector<std::string> artifacts;
};

/// Validates a flat JSON scenario, runs it and writes `manifest.json` plus the
/// experiment outputs under <out>/<name>/. A failed run writes whatever was
/// produced, with its manifest, under <out>/failed/<name>/. `origin` is echoed
/// in the manifest.
RunResult run_scenario(const nlohmann::json& config, const RunOptions& options,
                       const std::string& origin = "<memory>");
RunResult run_scenario_file(const std::filesystem::path& path, const RunOptions& options);

/// Runs every *.json file of `dir` in name order; returns the largest exit
/// code seen. One summary line per scenario goes to `log`.
int run_suite(const std::filesystem::path& dir, const RunOptions& options, std::ostream& log);

/// (name, one-line description) of every experiment.
std::vector<std::pair<std::string, std::string>> list_experiments();

/// Functional from {"kind": ..., "params": {...}}. Kinds: bump, circle, disc,
/// semicircle, signed_pair. Points are [re, im] arrays.
LinearFunctional parse_functional(const nlohmann::json& spec);

}  // namespace loewnerlab
