// Command-line front end: one subcommand per task plus `report`, which runs
// every config in a directory.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "llnlab/runner.hpp"

namespace fs = std::filesystem;
using namespace llnlab;

namespace {

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (*end != '\0') throw Error(ErrorKind::config_invalid, std::string(name) + " is not an integer");
  return x;
}

void print_run(const RunManifest& run, const std::string& label) {
  std::cout << (run.passed ? "ok    " : "FAIL  ") << label << " -> " << run.out_dir.string() << "\n";
  for (const auto& e : run.expectations) {
    std::cout << "        " << (e.passed ? "pass " : "fail ") << e.path << ": " << e.detail << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laws-of-large-numbers laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string report_dir;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads, 0 = hardware concurrency");
  };

  std::vector<std::pair<CLI::App*, Task>> task_cmds;
  for (Task t : {Task::simulate, Task::check, Task::proof, Task::integrate, Task::oracle}) {
    CLI::App* sub = app.add_subcommand(to_string(t), "run a '" + to_string(t) + "' config");
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    add_common(sub);
    task_cmds.emplace_back(sub, t);
  }
  CLI::App* report = app.add_subcommand("report", "run every *.json config in a directory");
  report->add_option("--configs", report_dir, "directory of configs")->required()->check(CLI::ExistingDirectory);
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunOptions options;
    options.seed = seed;
    options.fallback_seed = env_u64("LLNLAB_SEED");
    if (threads == 0) {
      if (auto t = env_u64("LLNLAB_THREADS")) threads = static_cast<unsigned>(*t);
    }
    options.threads = threads;

    if (report->parsed()) {
      std::vector<fs::path> configs;
      for (const auto& entry : fs::directory_iterator(report_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") configs.push_back(entry.path());
      }
      std::sort(configs.begin(), configs.end());
      const fs::path base = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
      int worst = 0;
      for (const fs::path& path : configs) {
        RunOptions each = options;
        each.out_dir = base / path.stem();
        try {
          const RunManifest run = run_config(load_config(path), each);
          print_run(run, path.filename().string());
          worst = std::max(worst, exit_code(run));
        } catch (const Error& e) {
          std::cout << "ERROR " << path.filename().string() << ": " << to_string(e.kind()) << ": " << e.what()
                    << "\n";
          worst = std::max(worst, exit_code(e));
        }
      }
      std::cout << configs.size() << " configs\n";
      return worst;
    }

    for (const auto& [sub, task] : task_cmds) {
      if (!sub->parsed()) continue;
      const ExperimentConfig config = load_config(config_path);
      if (config.task != task) {
        throw Error(ErrorKind::config_invalid,
                    "config task '" + to_string(config.task) + "' does not match subcommand '" + to_string(task) + "'");
      }
      if (!out_dir.empty()) options.out_dir = fs::path(out_dir);
      const RunManifest run = run_config(config, options);
      print_run(run, config.name);
      return exit_code(run);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
