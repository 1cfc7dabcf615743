#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "llnlab/error.hpp"
#include "llnlab/runner.hpp"
#include "llnlab/serialize.hpp"

using namespace llnlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("llnlab_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig config(const std::string& text) { return parse_config(Json::parse(text)); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LLNLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("numbers are rounded to 12 significant digits") {
  CHECK(format_number(0.1 + 0.2) == "0.3");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(0.0) == "0");
  CHECK(round12(1.0 / 3.0) == 0.333333333333);
  CHECK(number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(number(std::nan("")) == "nan");
}

TEST_CASE("csv quoting and width") {
  CsvTable t({"a", "b", "c"});
  t.add(std::string("x,y")).add(1.5).add(std::string("say \"hi\""));
  t.end_row();
  t.add(std::int64_t{3}).add(true).add(std::string("plain"));
  t.end_row();
  CHECK(t.str() == "a,b,c\n\"x,y\",1.5,\"say \"\"hi\"\"\"\n3,1,plain\n");
  CHECK(t.rows() == 2);
  t.add(1.0);
  CHECK_THROWS_AS(t.end_row(), Error);
}

TEST_CASE("family descriptors round-trip through JSON") {
  const FamilyDescriptor cases[] = {
      FamilyDescriptor::cosine().then(Transform::affine(2.0, 1.0)),
      FamilyDescriptor::gated_gaussian().then({TransformKind::positive_part}),
      FamilyDescriptor::exponential(3.0).then({TransformKind::truncate}),
      FamilyDescriptor::uniform(-1.0, 2.0).then({TransformKind::essinf_shift}),
      FamilyDescriptor::bernoulli_scaled(0.25, 4.0),
      FamilyDescriptor::constant(2.0),
      FamilyDescriptor::step().then({TransformKind::center}),
  };
  for (const FamilyDescriptor& d : cases) {
    const FamilyDescriptor back = family_from_json(to_json(d));
    CHECK(back.base == d.base);
    CHECK(back.iid == d.iid);
    CHECK(back.transforms == d.transforms);
  }
  for (const Normalizer& n : {Normalizer::linear(), Normalizer::power(0.75), Normalizer::explicit_values({1, 2, 3})}) {
    const Normalizer back = normalizer_from_json(to_json(n));
    CHECK(back.name() == n.name());
  }
}

TEST_CASE("config validation names the offending field") {
  const auto message = [](const std::string& text) {
    try {
      config(text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config_invalid);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"task": "fly"})").find("task") != std::string::npos);
  CHECK(message(R"({"task": "check", "bogus": 1})").find("bogus") != std::string::npos);
  CHECK(message(R"({"task": "check", "family": {"kind": "wave"}})").find("family.kind") != std::string::npos);
  CHECK(message(R"({"task": "check", "family": {"kind": "iid", "params": {"base": "exponential", "rate": "x"}}})")
            .find("rate") != std::string::npos);
  CHECK(message(R"({"task": "check", "seed": -3})").find("seed") != std::string::npos);
  CHECK(message(R"({"task": "check", "expect": [{"path": "/result/x"}]})").find("expect[0]") != std::string::npos);
}

TEST_CASE("step oracle at n = 2 reports probability 0.25") {
  const fs::path out = scratch("oracle");
  RunOptions o;
  o.out_dir = out;
  const RunManifest m = run_config(
      config(R"({"task": "oracle", "seed": 1, "family": {"kind": "step"}, "task_params": {"n": 2},
                 "expect": [{"path": "/result/probability", "equals": 0.25}]})"),
      o);
  CHECK(m.passed);
  CHECK(exit_code(m) == 0);
  CHECK(m.summary["result"]["probability"] == 0.25);
  for (const std::string& f : m.outputs) CHECK(fs::exists(out / f));
}

TEST_CASE("cosine kolmogorov check converges") {
  const fs::path out = scratch("kolmogorov");
  RunOptions o;
  o.out_dir = out;
  const RunManifest m = run_config(config(R"({"task": "check", "seed": 1, "family": {"kind": "cosine"},
                 "task_params": {"condition": "kolmogorov", "horizon": 10000}})"),
                                   o);
  CHECK(m.summary["result"]["verdict"] == "converges_evidence");
  // One CSV row per n plus the header.
  const std::string csv = slurp(out / "data.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10001);
  CHECK(csv.rfind("n,term,partial_sum\n", 0) == 0);
}

TEST_CASE("failed expectations give exit status 1") {
  RunOptions o;
  o.out_dir = scratch("failing");
  const RunManifest m = run_config(
      config(R"({"task": "oracle", "seed": 1, "task_params": {"n": 2},
                 "expect": [{"path": "/result/probability", "min": 0.3}, {"path": "/result/missing", "equals": 1}]})"),
      o);
  CHECK_FALSE(m.passed);
  CHECK(exit_code(m) == 1);
  CHECK_FALSE(m.expectations[0].passed);
  CHECK_FALSE(m.expectations[1].passed);
}

TEST_CASE("task parameter errors write nothing") {
  const fs::path out = scratch("bad_params");
  RunOptions o;
  o.out_dir = out;
  try {
    run_config(config(R"({"task": "check", "seed": 1, "family": {"kind": "cosine"},
                          "task_params": {"condition": "kolmogorov", "horizon": 100, "extra": 2}})"),
               o);
    FAIL("expected config_invalid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config_invalid);
    CHECK(std::string(e.what()).find("task_params.extra") != std::string::npos);
    CHECK(exit_code(e) == 2);
  }
  CHECK_FALSE(fs::exists(out));
  try {
    run_config(config(R"({"task": "check", "seed": 1, "family": {"kind": "step"},
                          "task_params": {"condition": "kolmogorov", "horizon": 3}})"),
               o);
    FAIL("expected task_failed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::task_failed);
    CHECK(exit_code(e) == 3);
  }
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("a seed is required") {
  RunOptions o;
  o.out_dir = scratch("noseed");
  const ExperimentConfig c = config(R"({"task": "oracle", "task_params": {"n": 3}})");
  CHECK_THROWS_AS(run_config(c, o), Error);
  o.fallback_seed = 11;
  CHECK(run_config(c, o).summary["seed"] == 11);
  o.seed = 12;
  CHECK(run_config(c, o).summary["seed"] == 12);
}

TEST_CASE("replay gives byte-identical bodies") {
  const ExperimentConfig c = config(R"({"task": "simulate", "seed": 77, "family": {"kind": "gated_gaussian"},
      "task_params": {"analysis": "lln", "checkpoints": [10, 100], "replications": 300, "tolerance": 0.1}})");
  RunOptions a;
  a.out_dir = scratch("replay_a");
  a.threads = 1;
  RunOptions b;
  b.out_dir = scratch("replay_b");
  b.threads = 4;
  run_config(c, a);
  run_config(c, b);
  for (const char* f : {"data.csv", "summary.json"}) CHECK(slurp(*a.out_dir / f) == slurp(*b.out_dir / f));
  CHECK(slurp(*a.out_dir / "data.csv").rfind("checkpoint,mean_dev,stddev,q05,q50,q95,frac_within_tol\n", 0) == 0);
}

TEST_CASE("sandwich summary reports zero violations") {
  RunOptions o;
  o.out_dir = scratch("sandwich");
  const RunManifest m = run_config(
      config(R"({"task": "proof", "seed": 3, "family": {"kind": "cosine", "transforms": [{"kind": "affine", "scale": 1, "shift": 1}]},
                 "task_params": {"analysis": "sandwich", "alpha": 2, "epsilon": 0.5, "horizon": 500}})"),
      o);
  CHECK(m.summary["result"]["violations"] == 0);
  const std::string csv = slurp(*o.out_dir / "data.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 501);
}

TEST_CASE("tail integral flags the step family at every t_max") {
  RunOptions o;
  o.out_dir = scratch("cg_step");
  const RunManifest step = run_config(
      config(R"({"task": "check", "seed": 1, "family": {"kind": "step"},
                 "task_params": {"condition": "cg_tail", "t_max": [1, 10, 100, 1000], "sup_horizon": 500}})"),
      o);
  CHECK(step.summary["result"]["divergence_flagged_everywhere"] == true);
  o.out_dir = scratch("cg_exp");
  const RunManifest e = run_config(
      config(R"({"task": "check", "seed": 1, "family": {"kind": "iid", "params": {"base": "exponential", "rate": 1}},
                 "task_params": {"condition": "cg_tail", "t_max": [1, 10, 30], "sup_horizon": 100}})"),
      o);
  CHECK(e.summary["result"]["divergence_flagged_anywhere"] == false);
  for (const Json& p : e.summary["result"]["points"]) {
    CHECK(std::abs(p["value"].get<double>() + p["truncation_bound"].get<double>() - 1.0) < 1e-4);
  }
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << "{ not json";
    std::ofstream(dir / "ok.json") << R"({"task": "oracle", "seed": 1, "task_params": {"n": 2}})";
  }
  CHECK(run_cli("oracle --config " + (dir / "ok.json").string() + " --out " + (dir / "o1").string()) == 0);
  CHECK(run_cli("check --config " + (dir / "ok.json").string() + " --out " + (dir / "o2").string()) == 2);
  CHECK(run_cli("oracle --config " + (dir / "bad.json").string() + " --out " + (dir / "o3").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "o3"));
  CHECK(run_cli("fly") == 2);
}

TEST_CASE("every shipped config parses") {
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(LLNLAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ++count;
    const ExperimentConfig c = load_config(e.path());
    CHECK(c.seed.has_value());
    CHECK_FALSE(c.expect.empty());
  }
  CHECK(count >= 15);
}
