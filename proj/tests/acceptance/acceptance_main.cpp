// Acceptance runner: one PASS/FAIL line per criterion. Each criterion runs its
// shipped config(s) and checks the summary against tolerances pinned here,
// independently of the `expect` blocks inside the configs.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "llnlab/error.hpp"
#include "llnlab/montecarlo.hpp"
#include "llnlab/runner.hpp"

using namespace llnlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
const fs::path kConfigs = LLNLAB_CONFIG_DIR;
const fs::path kScratch = fs::temp_directory_path() / "llnlab_acceptance";

std::map<std::string, Json> g_summaries;

Json run(const std::string& stem, unsigned threads, const fs::path& root) {
  RunOptions o;
  o.threads = threads;
  o.out_dir = root / stem;
  return run_config(load_config(kConfigs / (stem + ".json")), o).summary;
}

const Json& result(const std::string& stem) {
  auto it = g_summaries.find(stem);
  if (it == g_summaries.end()) it = g_summaries.emplace(stem, run(stem, 8, kScratch / "threads8")).first;
  return it->second.at("result");
}

double num(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return NAN;
  }
  return j.get<double>();
}

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void near(const std::string& what, double value, double target, double tol) {
    const bool pass = std::abs(value - target) <= tol;
    ok = ok && pass;
    detail << what << "=" << value << (pass ? " ok" : " OUT") << " (" << target << "+-" << tol << "); ";
  }
  void within(const std::string& what, double value, double lo, double hi) {
    const bool pass = value >= lo && value <= hi;
    ok = ok && pass;
    detail << what << "=" << value << (pass ? " ok" : " OUT") << " [" << lo << ", " << hi << "]; ";
  }
  void is(const std::string& what, bool pass) {
    ok = ok && pass;
    detail << what << (pass ? " ok" : " FAILED") << "; ";
  }
};

struct Criterion {
  int id;
  std::string title;
  double max_seconds;
  std::function<void(Check&)> body;
};

std::vector<Criterion> criteria() {
  return {
      {1, "positive-part mean", 1.0,
       [](Check& c) { c.near("mean_pos", num(result("c01_pospart_mean")["mean_pos"]), 0.199471, 1e-4); }},
      {2, "triple integral with Monte Carlo cross-check", 30.0,
       [](Check& c) {
         const Json& r = result("c02_triple_integral");
         c.near("triple_integral", num(r["triple_integral"]), 0.15915, 5e-3);
         c.is("mc pairs = 1e7", r["monte_carlo"]["pairs"] == 10000000);
         c.within("|z| triple", num(r["monte_carlo"]["triple_integral_abs_z"]), 0.0, 4.0);
         c.within("|z| product", num(r["monte_carlo"]["product_pos_abs_z"]), 0.0, 4.0);
         c.is("cov_pos > 0", num(r["cov_pos"]) > 0.0);
       }},
      {3, "step deviation >= 1/4 and Monte Carlo at n = 10", 10.0,
       [](Check& c) {
         const Json& r = result("c03_step_oracle");
         bool all = r["values"].size() == 19;
         for (const Json& v : r["values"]) all = all && num(v["probability"]) >= 0.25;
         c.is("P >= 0.25 for n in [2, 20]", all);
         c.is("mc n = 10 with 1e5 samples", r["monte_carlo"]["n"] == 10 && r["monte_carlo"]["samples"] == 100000);
         c.within("|z|", num(r["monte_carlo"]["abs_z"]), 0.0, 3.0);
         // Independent of the config: the exact value itself at n = 10.
         c.near("exact(10) vs summary", num(r["monte_carlo"]["exact"]), exact_step_deviation(10), 1e-12);
       }},
      {4, "dependence probe on the gated Gaussian", 5.0,
       [](Check& c) {
         const Json& r = result("c04_dependence");
         c.is("1e5 samples", r["samples"] == 100000);
         c.near("P(X_j>0 | X_i>0)", num(r["p_cond"]), 0.50, 0.02);
         c.near("P(X_j>0)", num(r["p_j"]), 0.25, 0.02);
       }},
      {5, "pairwise uncorrelation of the cosine family", 10.0,
       [](Check& c) {
         const Json& m = result("c05a_cosine_moments");
         c.is("range 1..20", m["i_min"] == 1 && m["i_max"] == 20);
         c.within("max |E X_i X_j|, i<j", num(m["max_abs_off_diagonal"]), 0.0, 1e-10);
         c.within("max |E X_i^2 - 1/2|", num(m["max_abs_diagonal_deviation"]), 0.0, 1e-10);
         const Json& q = result("c05b_cosine_ratio");
         c.is("n = 100", q["points"][0]["n"] == 100);
         c.within("ratio", num(q["points"][0]["ratio"]), 0.8, 1.2);
       }},
      {6, "quasi-uncorrelation failure for the positive part", 60.0,
       [](Check& c) {
         const Json& q = result("c06_pospart_ratio");
         c.is("n = 100", q["points"][0]["n"] == 100);
         c.within("ratio", num(q["points"][0]["ratio"]), 15.0, 25.0);
         const double cov = 1.0 / (8.0 * kPi);
         const double oracle = 1.0 + 99.0 * cov / (0.25 - cov);
         c.within("analytic oracle", oracle, 15.0, 25.0);
       }},
      {7, "Kolmogorov condition verdicts", 1.0,
       [](Check& c) {
         c.is("step diverges", result("c07a_kolmogorov_step")["verdict"] == "diverges_evidence");
         const Json& r = result("c07b_kolmogorov_cosine");
         c.is("cosine converges", r["verdict"] == "converges_evidence");
         c.within("max partial sum", num(r["max_partial_sum"]), 0.0, kPi * kPi / 12.0 + 1e-6);
       }},
      {8, "Basel tail bounds", 1.0,
       [](Check& c) {
         const Json& r = result("c08_basel");
         c.is("k_max = 1e4", r["k_max"] == 10000);
         c.is("all hold", r["all_hold"] == true);
         c.within("equality gap at k = 1", num(r["k1_equality_gap"]), 0.0, 1e-9);
       }},
      {9, "subsequence index invariants", 30.0,
       [](Check& c) {
         const Json& r = result("c09_index_invariants");
         c.is("horizon 1e5", r["horizon"] == 100000);
         c.is("6 grid points", r["combinations"].size() == 6);
         c.is("no invariant failures", r["total_failures"] == 0);
       }},
      {10, "sandwich chain and slack monotonicity", 60.0,
       [](Check& c) {
         const Json& r = result("c10a_sandwich");
         c.is("60 runs (3 alpha x 2 eps x 10 seeds)", r["runs"] == 60);
         c.is("horizon 1e4", r["horizon"] == 10000);
         c.is("zero violations", r["violations"] == 0);
         c.is("slack decreasing", result("c10b_slack")["monotone_decreasing"] == true);
       }},
      {11, "kappa bounds", 5.0,
       [](Check& c) {
         const Json& r = result("c11_kappa");
         c.is("j_max = 1000", r["j_max"] == 1000);
         c.is("all hold", r["failures"] == 0);
         c.within("max kappa / bound", num(r["max_kappa_over_bound"]), 0.0, 1.0);
       }},
      {12, "Chebyshev dominance", 60.0,
       [](Check& c) {
         const Json& p = result("c12a_chebyshev_proof");
         c.is("proofkit grid holds", p["failures"] == 0 && p["checked"].get<std::int64_t>() > 0);
         c.is("montecarlo grid holds", result("c12b_chebyshev_simulate")["all_hold"] == true);
       }},
      {13, "finite-horizon SLLN proxy", 60.0,
       [](Check& c) {
         const Json& r = result("c13_slln_proxy");
         const Json& last = r["checkpoints"][r["checkpoints"].size() - 1];
         c.is("n = 1e5, 100 replications", last["checkpoint"] == 100000 && r["replications"] == 100);
         c.within("replications within 0.01", num(last["frac_within_tol"]) * 100.0, 90.0, 100.0);
       }},
      {14, "truncation diagnostics", 10.0,
       [](Check& c) {
         const Json& e = result("c14a_truncation_exponential");
         c.is("horizon 50", e["horizon"] == 50);
         c.near("mismatch partial sum", num(e["mismatch_partial_sum"]), 0.58198, 1e-3);
         c.near("vs 1/(e-1)", num(e["mismatch_partial_sum"]), 1.0 / (std::exp(1.0) - 1.0), 1e-3);
         c.is("step l1 gaps identically 0", num(result("c14b_truncation_step")["max_abs_l1_gap"]) == 0.0);
       }},
      {15, "replay determinism across thread counts", 600.0,
       [](Check& c) {
         std::vector<fs::path> configs;
         for (const auto& e : fs::directory_iterator(kConfigs)) {
           if (e.path().extension() == ".json") configs.push_back(e.path());
         }
         std::sort(configs.begin(), configs.end());
         const auto slurp = [](const fs::path& p) {
           std::ifstream in(p, std::ios::binary);
           std::stringstream ss;
           ss << in.rdbuf();
           return ss.str();
         };
         std::size_t identical = 0;
         for (const fs::path& p : configs) {
           const std::string stem = p.stem().string();
           if (!g_summaries.contains(stem)) g_summaries.emplace(stem, run(stem, 8, kScratch / "threads8"));
           run(stem, 1, kScratch / "threads1");
           bool same = true;
           for (const char* f : {"data.csv", "summary.json"}) {
             same = same && slurp(kScratch / "threads8" / stem / f) == slurp(kScratch / "threads1" / stem / f);
           }
           if (same) {
             ++identical;
           } else {
             c.is(stem + " identical", false);
           }
         }
         c.is(std::to_string(identical) + "/" + std::to_string(configs.size()) + " configs byte-identical",
              identical == configs.size() && !configs.empty());
       }},
  };
}

}  // namespace

int main() {
  fs::remove_all(kScratch);
  int failures = 0;
  for (const Criterion& k : criteria()) {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    try {
      k.body(c);
    } catch (const std::exception& e) {
      c.is(std::string("error: ") + e.what(), false);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < k.max_seconds;
    if (!in_time) c.is("runtime limit", false);
    std::printf("%s criterion %2d: %s | %.2fs (limit %.0fs) | %s\n", c.ok ? "PASS" : "FAIL", k.id, k.title.c_str(),
                seconds, k.max_seconds, c.detail.str().c_str());
    if (!c.ok) ++failures;
  }
  std::printf("%d of 15 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
