#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "llnlab/error.hpp"
#include "llnlab/serialize.hpp"

namespace llnlab {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Task { simulate, check, proof, integrate, oracle };
std::string to_string(Task task);
/// Throws Error(config_invalid).
Task task_from_string(const std::string& name);

/// A post-run assertion on the summary: the value at JSON pointer `path`
/// equals `equals`, or lies in [min, max].
struct Expectation {
  std::string path;
  std::optional<Json> equals;
  std::optional<double> min;
  std::optional<double> max;
};

struct ExperimentConfig {
  std::string name;
  Task task = Task::check;
  std::optional<FamilyDescriptor> family;
  Normalizer normalizer = Normalizer::linear();
  Json task_params = Json::object();
  std::optional<std::uint64_t> seed;
  std::string output_path;
  std::vector<Expectation> expect;
  Json raw;  ///< the config as read
};

/// Validates everything except task_params, which are checked when the task
/// runs (still before any file is written). Throws Error(config_invalid).
ExperimentConfig parse_config(const Json& j, const std::string& default_name = "run");
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  ///< overrides config.output_path
  std::optional<std::uint64_t> seed;              ///< overrides config.seed
  std::optional<std::uint64_t> fallback_seed;     ///< used when neither is set
  unsigned threads = 0;
};

struct ExpectationResult {
  std::string path;
  bool passed = false;
  std::string detail;
};

struct RunManifest {
  Json manifest;
  Json summary;
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;
  std::vector<ExpectationResult> expectations;
  bool passed = true;
};

/// Runs the config's task and writes data.csv, summary.json and manifest.json
/// into the output directory. Nothing is written when the config or the task
/// fails. summary.json and data.csv depend only on the config and the seed.
RunManifest run_config(const ExperimentConfig& config, const RunOptions& options);

/// Exit status for a finished run: 0 all expectations pass, 1 otherwise.
int exit_code(const RunManifest& manifest);
/// 2 for config and usage errors, 3 for everything else.
int exit_code(const Error& error);

}  // namespace llnlab
