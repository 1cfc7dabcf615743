#include "llnlab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "llnlab/parallel.hpp"
#include "llnlab/quadrature.hpp"
#include "llnlab/rng.hpp"

namespace llnlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorKind::config_invalid, field + ": " + message);
}

/// Typed, strict view of a task_params object. Every key must be consumed;
/// finish() rejects the rest as unknown.
class Params {
 public:
  explicit Params(const Json& j) : j_(j) {
    if (!j_.is_object()) invalid("task_params", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
    const Json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (v->is_number_integer()) return v->get<std::int64_t>();
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (d == std::floor(d) && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    invalid("task_params." + key, "expected an integer");
  }

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number()) invalid("task_params." + key, "expected a number");
    return v->get<double>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const Json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_string()) invalid("task_params." + key, "expected a string");
    return v->get<std::string>();
  }

  bool flag(const std::string& key, bool fallback) {
    const Json* v = lookup(key, true);
    if (!v) return fallback;
    if (!v->is_boolean()) invalid("task_params." + key, "expected true or false");
    return v->get<bool>();
  }

  /// A number or an array of numbers.
  std::vector<double> reals(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const Json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    std::vector<double> out;
    if (v->is_number()) return {v->get<double>()};
    if (!v->is_array() || v->empty()) invalid("task_params." + key, "expected a number or a non-empty array");
    for (const auto& x : *v) {
      if (!x.is_number()) invalid("task_params." + key, "expected numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::int64_t> integers(const std::string& key,
                                     std::optional<std::vector<std::int64_t>> fallback = std::nullopt) {
    const Json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    std::vector<std::int64_t> out;
    const auto one = [&](const Json& x) {
      if (x.is_number_integer()) return x.get<std::int64_t>();
      if (x.is_number_float() && x.get<double>() == std::floor(x.get<double>())) {
        return static_cast<std::int64_t>(x.get<double>());
      }
      invalid("task_params." + key, "expected integers");
    };
    if (v->is_number()) return {one(*v)};
    if (!v->is_array() || v->empty()) invalid("task_params." + key, "expected an integer or a non-empty array");
    for (const auto& x : *v) out.push_back(one(x));
    return out;
  }

  const Json& object(const std::string& key) {
    const Json* v = lookup(key, false);
    if (!v->is_object()) invalid("task_params." + key, "expected an object");
    return *v;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.contains(item.key())) invalid("task_params." + item.key(), "unknown parameter");
    }
  }

 private:
  const Json* lookup(const std::string& key, bool optional) {
    used_.insert(key);
    if (!j_.contains(key)) {
      if (optional) return nullptr;
      invalid("task_params." + key, "missing");
    }
    return &j_.at(key);
  }

  const Json& j_;
  std::set<std::string> used_;
};

struct TaskOutput {
  Json result;
  CsvTable csv{{"key", "value"}};
};

struct Context {
  const ExperimentConfig& config;
  std::uint64_t seed;
  unsigned threads;

  SequenceFamily family() const {
    if (!config.family) invalid("family", "missing; this task needs a family");
    return make_family(*config.family);
  }
};

void positive(std::int64_t v, const std::string& key) {
  if (v < 1) invalid("task_params." + key, "must be >= 1");
}

// ---------------------------------------------------------------- simulate

EventSpec event_from_json(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    invalid(where, "expected an object with a 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  const auto num = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) invalid(where + "." + key, "expected a number");
    return j.at(key).get<double>();
  };
  EventSpec e;
  if (kind == "centered_sum_geq") {
    e = EventSpec::centered_sum_geq(num("threshold", 0.0));
  } else if (kind == "scaled_mean_outside") {
    e = EventSpec::scaled_mean_outside(num("center", 0.0), num("delta", 0.0));
  } else if (kind == "value_gt") {
    const double index = num("index", 1.0);
    if (index != std::floor(index)) invalid(where + ".index", "expected an integer");
    e = EventSpec::value_gt(static_cast<std::int64_t>(index), num("threshold", 0.0));
  } else if (kind == "conditional") {
    if (!j.contains("condition") || !j.contains("target")) invalid(where, "needs 'condition' and 'target'");
    e = EventSpec::conditional(event_from_json(j.at("condition"), where + ".condition"),
                               event_from_json(j.at("target"), where + ".target"));
  } else {
    invalid(where + ".kind", "unknown event kind '" + kind + "'");
  }
  try {
    e.validate();
  } catch (const Error& err) {
    invalid(where, err.what());
  }
  return e;
}

TaskOutput simulate_lln(const Context& ctx, Params& p) {
  const auto checkpoints = p.integers("checkpoints");
  const auto replications = p.integer("replications", 100);
  const double tolerance = p.real("tolerance", 0.01);
  p.finish();
  const ExperimentResult r = run_lln_experiment(ctx.family(), ctx.config.normalizer, checkpoints,
                                                replications, tolerance, ctx.seed, ctx.threads);
  return {summary_json(r), experiment_csv(r)};
}

TaskOutput simulate_event(const Context& ctx, Params& p) {
  const std::int64_t n = p.integer("n");
  const std::int64_t samples = p.integer("samples");
  const EventSpec event = event_from_json(p.object("event"), "task_params.event");
  const bool compare_exact = p.flag("exact_oracle", false);
  p.finish();
  positive(n, "n");
  const SequenceFamily family = ctx.family();
  const ProbabilityEstimate e = estimate_event_probability(family, event, n, samples, ctx.seed, ctx.threads);
  TaskOutput out;
  out.result = summary_json(e);
  out.result["n"] = n;
  out.result["event"] = to_string(event.kind);
  out.csv = CsvTable({"n", "p_hat", "stderr", "ci_lower", "ci_upper", "exact"});
  double exact = std::numeric_limits<double>::quiet_NaN();
  if (compare_exact) {
    if (family.descriptor().kind() != FamilyKind::step || event.kind != EventKind::centered_sum_geq ||
        event.threshold != 0.5) {
      invalid("task_params.exact_oracle", "the exact oracle covers the step family with centered_sum_geq 0.5");
    }
    exact = exact_step_deviation(n);
    const double z = e.std_error > 0.0 ? (e.p_hat - exact) / e.std_error : (e.p_hat == exact ? 0.0 : kInf);
    out.result["exact"] = number(exact);
    out.result["abs_z"] = number(std::abs(z));
  }
  out.csv.add(n).add(e.p_hat).add(e.std_error).add(e.ci95.lower).add(e.ci95.upper).add(exact);
  out.csv.end_row();
  return out;
}

TaskOutput simulate_dependence(const Context& ctx, Params& p) {
  const std::int64_t i = p.integer("i");
  const std::int64_t j = p.integer("j");
  const std::int64_t samples = p.integer("samples");
  ProbeSpec probe;
  const std::string kind = p.text("probe", "sign");
  if (kind == "sign") {
    probe.kind = ProbeKind::sign;
  } else if (kind == "near_max") {
    probe.kind = ProbeKind::near_max;
  } else {
    invalid("task_params.probe", "expected 'sign' or 'near_max'");
  }
  probe.threshold = p.real("threshold", 0.0);
  probe.epsilon = p.real("epsilon", 0.05);
  probe.max = p.real("max", 1.0);
  p.finish();
  const DependenceProbe d = dependence_probe(ctx.family(), i, j, probe, samples, ctx.seed, ctx.threads);
  TaskOutput out;
  out.result = summary_json(d);
  out.result["i"] = i;
  out.result["j"] = j;
  out.result["probe"] = kind;
  out.result["abs_gap_z"] = number(d.gap_stderr > 0.0 ? std::abs(d.independence_gap) / d.gap_stderr : 0.0);
  out.csv = CsvTable({"i", "j", "p_joint", "p_i", "p_j", "p_cond", "independence_gap", "gap_stderr"});
  out.csv.add(i).add(j).add(d.p_joint).add(d.p_i).add(d.p_j).add(d.p_cond).add(d.independence_gap).add(
      d.gap_stderr);
  out.csv.end_row();
  return out;
}

TaskOutput simulate_chebyshev(const Context& ctx, Params& p) {
  const auto ns = p.integers("n");
  const auto deltas = p.reals("delta");
  const std::int64_t samples = p.integer("samples");
  p.finish();
  const SequenceFamily family = ctx.family();
  TaskOutput out;
  out.csv = CsvTable({"n", "delta", "p_hat", "stderr", "bound", "holds_within_noise"});
  Json cases = Json::array();
  bool all = true;
  std::uint64_t sub = 0;
  for (std::int64_t n : ns) {
    for (double delta : deltas) {
      const ChebyshevCheck c =
          chebyshev_empirical(family, n, delta, samples, derive_key(ctx.seed, sub++), ctx.threads);
      Json row = summary_json(c);
      row["n"] = n;
      row["delta"] = number(delta);
      cases.push_back(row);
      all = all && c.holds_within_noise;
      out.csv.add(n).add(delta).add(c.p_hat).add(c.std_error).add(c.bound).add(c.holds_within_noise);
      out.csv.end_row();
    }
  }
  out.result["cases"] = cases;
  out.result["all_hold"] = all;
  return out;
}

TaskOutput run_simulate(const Context& ctx, Params& p) {
  const std::string analysis = p.text("analysis", "lln");
  if (analysis == "lln") return simulate_lln(ctx, p);
  if (analysis == "event") return simulate_event(ctx, p);
  if (analysis == "dependence") return simulate_dependence(ctx, p);
  if (analysis == "chebyshev") return simulate_chebyshev(ctx, p);
  invalid("task_params.analysis", "unknown simulate analysis '" + analysis + "'");
}

// ------------------------------------------------------------------- check

TaskOutput check_kolmogorov(const Context& ctx, Params& p) {
  const std::int64_t horizon = p.integer("horizon");
  const double floor = p.real("divergence_floor", kDivergenceFloor);
  p.finish();
  const SequenceFamily family = ctx.family();
  const SeriesReport r =
      kolmogorov_series(family.require_moments().variance, ctx.config.normalizer, horizon, floor);
  return {summary_json(r), series_csv(r)};
}

TaskOutput check_quasi(const Context& ctx, Params& p) {
  const auto grid = p.integers("n_grid");
  const std::int64_t replications = p.integer("replications");
  p.finish();
  const RatioReport r = quasi_uncorrelation_ratio(ctx.family(), grid, replications, ctx.seed, ctx.threads);
  return {summary_json(r), ratio_csv(r)};
}

TaskOutput check_scaled_mean(const Context& ctx, Params& p) {
  const std::int64_t horizon = p.integer("horizon");
  const std::int64_t mc = p.integer("mc_replications", 0);
  p.finish();
  std::optional<MonteCarloFallback> fallback;
  if (mc > 0) fallback = MonteCarloFallback{mc, ctx.seed, ctx.threads};
  const SequenceFamily family = ctx.family();
  const ScaledMeanSup r = scaled_mean_sup(family, ctx.config.normalizer, horizon, fallback);
  TaskOutput out;
  out.result = {{"a_hat", number(r.a_hat)},
                {"argmax_n", r.argmax_n},
                {"bounded_evidence", r.bounded_evidence},
                {"analytic", r.analytic},
                {"horizon", horizon}};
  out.csv = CsvTable({"n", "scaled_mean"});
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    out.csv.add(static_cast<std::int64_t>(i + 1)).add(r.series[i]);
    out.csv.end_row();
  }
  return out;
}

TaskOutput check_cg_tail(const Context& ctx, Params& p) {
  const auto t_max = p.reals("t_max");
  const double tolerance = p.real("tolerance", 1e-8);
  const std::int64_t sup_horizon = p.integer("sup_horizon", 1000);
  p.finish();
  positive(sup_horizon, "sup_horizon");
  const SequenceFamily family = ctx.family();
  // The sup over n <= N only sees part of a growing tail; doubling N exposes it.
  const SupTail near = sup_tail_over_horizon(family, sup_horizon);
  const SupTail far = sup_tail_over_horizon(family, 2 * sup_horizon);
  TaskOutput out;
  out.csv = CsvTable({"t_max", "value", "truncation_bound", "total_at_2N", "converges"});
  Json rows = Json::array();
  bool any_divergence = false;
  bool all_divergence = true;
  for (double t : t_max) {
    const TailIntegral a = cg_tail_integral(near.fn, t, tolerance);
    const TailIntegral b = cg_tail_integral(far.fn, t, tolerance);
    const double total_a = a.value + a.truncation_bound;
    const double total_b = b.value + b.truncation_bound;
    const bool stable = std::isfinite(total_a) && std::isfinite(total_b) &&
                        std::abs(total_b - total_a) <= 1e-6 * std::max(1.0, std::abs(total_a)) + 10.0 * tolerance;
    const bool converges = a.converges && b.converges && stable;
    any_divergence = any_divergence || !converges;
    all_divergence = all_divergence && !converges;
    rows.push_back({{"t_max", number(t)},
                    {"value", number(a.value)},
                    {"error_estimate", number(a.error_estimate)},
                    {"truncation_bound", number(a.truncation_bound)},
                    {"total_at_2N", number(total_b)},
                    {"converges", converges}});
    out.csv.add(t).add(a.value).add(a.truncation_bound).add(total_b).add(converges);
    out.csv.end_row();
  }
  out.result["sup_horizon"] = sup_horizon;
  out.result["points"] = rows;
  out.result["divergence_flagged_everywhere"] = all_divergence;
  out.result["divergence_flagged_anywhere"] = any_divergence;
  return out;
}

TaskOutput check_mad(const Context& ctx, Params& p) {
  const std::int64_t horizon = p.integer("horizon");
  const std::int64_t replications = p.integer("replications");
  p.finish();
  const SeriesReport r = mean_abs_deviation_rate(ctx.family(), horizon, replications, ctx.seed, ctx.threads);
  TaskOutput out{summary_json(r), series_csv(r)};
  out.result["bounded"] = r.verdict == Verdict::converges_evidence;
  return out;
}

TaskOutput check_truncation(const Context& ctx, Params& p) {
  const std::int64_t horizon = p.integer("horizon");
  const std::int64_t replications = p.integer("replications", 1000);
  p.finish();
  const TruncationGapReport r = truncation_gap_report(ctx.family(), horizon, replications, ctx.seed, ctx.threads);
  TaskOutput out;
  double max_gap = 0.0;
  for (double g : r.l1_gaps) max_gap = std::max(max_gap, std::abs(g));
  out.result = {{"closed_form", r.closed_form},
                {"horizon", horizon},
                {"mismatch_partial_sum", number(r.mismatch_prob_partial_sums.back())},
                {"max_abs_l1_gap", number(max_gap)},
                {"final_cesaro_gap", number(r.cesaro_gap.back())}};
  out.csv = CsvTable({"n", "l1_gap", "mismatch_partial_sum", "cesaro_gap"});
  for (std::size_t i = 0; i < r.l1_gaps.size(); ++i) {
    out.csv.add(static_cast<std::int64_t>(i + 1))
        .add(r.l1_gaps[i])
        .add(r.mismatch_prob_partial_sums[i])
        .add(r.cesaro_gap[i]);
    out.csv.end_row();
  }
  return out;
}

TaskOutput check_basel(const Context&, Params& p) {
  const std::int64_t k_max = p.integer("k_max");
  p.finish();
  positive(k_max, "k_max");
  const auto bounds = basel_tail_bounds(k_max);
  TaskOutput out;
  out.csv = CsvTable({"k", "tail_value", "bound", "holds"});
  std::int64_t failures = 0;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!bounds[i].holds) ++failures;
    out.csv.add(static_cast<std::int64_t>(i + 1)).add(bounds[i].tail_value).add(bounds[i].bound).add(bounds[i].holds);
    out.csv.end_row();
  }
  out.result = {{"k_max", k_max},
                {"all_hold", failures == 0},
                {"failures", failures},
                {"k1_tail", number(bounds[0].tail_value)},
                {"k1_bound", number(bounds[0].bound)},
                {"k1_equality_gap", number(std::abs(bounds[0].tail_value - bounds[0].bound))}};
  return out;
}

TaskOutput run_check(const Context& ctx, Params& p) {
  const std::string condition = p.text("condition");
  if (condition == "kolmogorov") return check_kolmogorov(ctx, p);
  if (condition == "quasi_uncorrelation") return check_quasi(ctx, p);
  if (condition == "scaled_mean_sup") return check_scaled_mean(ctx, p);
  if (condition == "cg_tail") return check_cg_tail(ctx, p);
  if (condition == "mean_abs_deviation") return check_mad(ctx, p);
  if (condition == "truncation_gap") return check_truncation(ctx, p);
  if (condition == "basel") return check_basel(ctx, p);
  invalid("task_params.condition", "unknown condition '" + condition + "'");
}

// ------------------------------------------------------------------- proof

/// Builds the index for each (alpha, epsilon) pair from a precomputed mean path.
SubsequenceIndex index_for(const std::vector<double>& path, double alpha, double epsilon, std::int64_t horizon,
                           const Normalizer& normalizer) {
  return build_index([&path](std::int64_t n) { return path[static_cast<std::size_t>(n - 1)]; }, alpha, epsilon,
                     horizon, normalizer);
}

std::vector<std::int64_t> s_values(Params& p, const SubsequenceIndex& index) {
  if (p.has("s")) return p.integers("s");
  p.integers("s", std::vector<std::int64_t>{});
  std::vector<std::int64_t> all;
  for (std::int64_t s = 0; s <= index.l; ++s) all.push_back(s);
  return all;
}

TaskOutput proof_index(const Context& ctx, Params& p) {
  const auto alphas = p.reals("alpha");
  const auto epsilons = p.reals("epsilon");
  const std::int64_t horizon = p.integer("horizon");
  p.finish();
  positive(horizon, "horizon");
  const SequenceFamily family = ctx.family();
  const std::vector<double> path = family.require_moments().mean_path(horizon);
  TaskOutput out;
  out.csv = CsvTable({"alpha", "epsilon", "A", "L", "cells", "checked", "failures"});
  Json combos = Json::array();
  std::int64_t total_failures = 0;
  for (double alpha : alphas) {
    for (double eps : epsilons) {
      const SubsequenceIndex index = index_for(path, alpha, eps, horizon, ctx.config.normalizer);
      const InvariantCheck check = check_index_invariants(index);
      total_failures += static_cast<std::int64_t>(check.failures.size());
      Json c = {{"alpha", number(alpha)},
                {"epsilon", number(eps)},
                {"A", number(index.a)},
                {"L", index.l},
                {"cells", static_cast<std::int64_t>(index.cells.size())},
                {"checked", check.checked},
                {"failures", static_cast<std::int64_t>(check.failures.size())}};
      if (!check.ok()) c["first_failure"] = check.failures.front();
      combos.push_back(c);
      out.csv.add(alpha).add(eps).add(index.a).add(index.l).add(static_cast<std::int64_t>(index.cells.size()))
          .add(check.checked).add(static_cast<std::int64_t>(check.failures.size()));
      out.csv.end_row();
    }
  }
  out.result = {{"horizon", horizon}, {"combinations", combos}, {"total_failures", total_failures},
                {"all_ok", total_failures == 0}};
  return out;
}

TaskOutput proof_kappa(const Context& ctx, Params& p) {
  const auto alphas = p.reals("alpha");
  const double eps = p.real("epsilon", 0.5);
  const std::int64_t horizon = p.integer("horizon");
  const std::int64_t j_max = p.integer("j_max");
  const SequenceFamily family = ctx.family();
  const std::vector<double> path = family.require_moments().mean_path(horizon);
  TaskOutput out;
  out.csv = CsvTable({"alpha", "s", "j", "kappa_plus", "kappa_minus", "bound", "holds"});
  Json combos = Json::array();
  std::int64_t failures = 0;
  double worst_ratio = 0.0;
  std::optional<std::vector<std::int64_t>> chosen_s;
  for (double alpha : alphas) {
    const SubsequenceIndex index = index_for(path, alpha, eps, horizon, ctx.config.normalizer);
    if (!chosen_s) chosen_s = s_values(p, index);
    for (std::int64_t s : *chosen_s) {
      const auto records = kappa_report(index, s, j_max);
      std::int64_t local = 0;
      for (const KappaRecord& r : records) {
        if (!r.holds) ++local;
        worst_ratio = std::max(worst_ratio, r.kappa / r.bound);
        out.csv.add(alpha).add(s).add(r.j).add(r.kappa_plus).add(r.kappa_minus).add(r.bound).add(r.holds);
        out.csv.end_row();
      }
      failures += local;
      combos.push_back({{"alpha", number(alpha)},
                        {"s", s},
                        {"kappa_1", number(records.front().kappa)},
                        {"bound_1", number(records.front().bound)},
                        {"failures", local}});
    }
  }
  p.finish();
  out.result = {{"j_max", j_max}, {"epsilon", number(eps)}, {"horizon", horizon}, {"combinations", combos},
                {"failures", failures}, {"all_hold", failures == 0}, {"max_kappa_over_bound", number(worst_ratio)}};
  return out;
}

Sign sign_from(const std::string& s) {
  if (s == "plus") return Sign::plus;
  if (s == "minus") return Sign::minus;
  invalid("task_params.sign", "expected 'plus' or 'minus'");
}

TaskOutput proof_variance_series(const Context& ctx, Params& p) {
  const double alpha = p.real("alpha", 2.0);
  const double eps = p.real("epsilon", 0.5);
  const std::int64_t horizon = p.integer("horizon");
  const Sign sign = sign_from(p.text("sign", "plus"));
  const std::int64_t s = p.integer("s", 0);
  const double c = p.real("c", 1.0);
  p.finish();
  const SequenceFamily family = ctx.family();
  const SubsequenceIndex index =
      index_for(family.require_moments().mean_path(horizon), alpha, eps, horizon, ctx.config.normalizer);
  const SeriesReport r = subsequence_variance_series(index, family.require_moments().variance, sign, s, c);
  return {summary_json(r), series_csv(r)};
}

TaskOutput proof_chebyshev(const Context& ctx, Params& p) {
  const auto alphas = p.reals("alpha");
  const double eps = p.real("epsilon", 0.5);
  const std::int64_t horizon = p.integer("horizon");
  const double delta = p.real("delta");
  const std::int64_t replications = p.integer("replications");
  const SequenceFamily family = ctx.family();
  const std::vector<double> path = family.require_moments().mean_path(horizon);
  TaskOutput out;
  out.csv = CsvTable({"alpha", "s", "level", "sign", "k", "p_hat", "stderr", "bound", "partial_sum_of_bounds", "holds"});
  std::int64_t failures = 0;
  std::int64_t checked = 0;
  std::uint64_t sub = 0;
  std::optional<std::vector<std::int64_t>> chosen_s;
  Json combos = Json::array();
  for (double alpha : alphas) {
    const SubsequenceIndex index = index_for(path, alpha, eps, horizon, ctx.config.normalizer);
    if (!chosen_s) chosen_s = s_values(p, index);
    for (std::int64_t s : *chosen_s) {
      const ChebyshevReport r =
          chebyshev_report(family, index, s, delta, replications, derive_key(ctx.seed, sub++), ctx.threads);
      for (std::size_t i = 0; i < r.levels.size(); ++i) {
        const ChebyshevLevel& l = r.levels[i];
        ++checked;
        if (!l.holds) ++failures;
        out.csv.add(alpha).add(s).add(l.level).add(to_string(l.sign)).add(l.k).add(l.p_hat).add(l.std_error)
            .add(l.bound).add(r.partial_sum_of_bounds[i]).add(l.holds);
        out.csv.end_row();
      }
      combos.push_back({{"alpha", number(alpha)},
                        {"s", s},
                        {"final_partial_sum_of_bounds", number(r.partial_sum_of_bounds.back())},
                        {"all_hold", r.all_hold()}});
    }
  }
  p.finish();
  out.result = {{"delta", number(delta)}, {"replications", replications}, {"checked", checked},
                {"failures", failures}, {"all_hold", failures == 0}, {"combinations", combos}};
  return out;
}

TaskOutput proof_sandwich(const Context& ctx, Params& p) {
  const auto alphas = p.reals("alpha");
  const auto epsilons = p.reals("epsilon");
  const std::int64_t horizon = p.integer("horizon");
  std::vector<std::int64_t> seeds = p.integers("seeds", std::vector<std::int64_t>{});
  p.finish();
  positive(horizon, "horizon");
  const bool explicit_seeds = !seeds.empty();
  if (!explicit_seeds) seeds.push_back(static_cast<std::int64_t>(ctx.seed));
  const SequenceFamily family = ctx.family();
  const std::vector<double> path = family.require_moments().mean_path(horizon);

  std::vector<Trajectory> trajectories(seeds.size());
  parallel_for(seeds.size(), ctx.threads, [&](std::size_t i) {
    trajectories[i] = family.sample(horizon, static_cast<std::uint64_t>(seeds[i]));
  });

  TaskOutput out;
  const bool single = alphas.size() == 1 && epsilons.size() == 1 && seeds.size() == 1;
  out.csv = single ? CsvTable({"n", "lower", "mid_lo", "mid", "mid_hi", "upper", "violated"})
                   : CsvTable({"alpha", "epsilon", "seed", "violations", "max_residual"});
  std::int64_t violations = 0;
  double max_residual = -kInf;
  std::string note;
  for (double alpha : alphas) {
    for (double eps : epsilons) {
      const SubsequenceIndex index = index_for(path, alpha, eps, horizon, ctx.config.normalizer);
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const SandwichReport r = sandwich_check(trajectories[i], index);
        violations += static_cast<std::int64_t>(r.violations.size());
        max_residual = std::max(max_residual, r.max_residual);
        note = r.note;
        if (single) {
          out.csv = sandwich_csv(r);
        } else {
          out.csv.add(alpha).add(eps).add(seeds[i]).add(static_cast<std::int64_t>(r.violations.size()))
              .add(r.max_residual);
          out.csv.end_row();
        }
      }
    }
  }
  out.result = {{"horizon", horizon},
                {"runs", static_cast<std::int64_t>(alphas.size() * epsilons.size() * seeds.size())},
                {"violations", violations},
                {"max_residual", number(max_residual)},
                {"tolerance", number(kSandwichTolerance)},
                {"note", note}};
  return out;
}

TaskOutput proof_slack(const Context& ctx, Params& p) {
  const auto ms = p.integers("m_values");
  const auto ks = p.integers("k_values");
  const std::int64_t horizon = p.integer("horizon", 1000);
  p.finish();
  const SequenceFamily family = ctx.family();
  const ScaledMeanSup sup = scaled_mean_sup(family, ctx.config.normalizer, horizon);
  const double a = std::max(0.0, sup.a_hat);
  TaskOutput out;
  out.csv = CsvTable({"m", "k", "alpha", "epsilon", "upper_slack", "lower_slack"});
  std::vector<std::vector<OuterSlack>> grid;
  for (std::int64_t m : ms) {
    if (m < 1) invalid("task_params.m_values", "must be >= 1");
    grid.emplace_back();
    for (std::int64_t k : ks) {
      if (k < 1) invalid("task_params.k_values", "must be >= 1");
      const double alpha = 1.0 + 1.0 / static_cast<double>(m);
      const double eps = 1.0 / static_cast<double>(k);
      const OuterSlack s = outer_slack(alpha, eps, a);
      grid.back().push_back(s);
      out.csv.add(m).add(k).add(alpha).add(eps).add(s.upper).add(s.lower);
      out.csv.end_row();
    }
  }
  // Strictly decreasing along increasing m (fixed k) and increasing k (fixed m).
  bool monotone = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid[i].size(); ++j) {
      if (i > 0 && ms[i] > ms[i - 1]) {
        monotone = monotone && grid[i][j].upper < grid[i - 1][j].upper && grid[i][j].lower < grid[i - 1][j].lower;
      }
      if (j > 0 && ks[j] > ks[j - 1]) {
        monotone = monotone && grid[i][j].upper < grid[i][j - 1].upper && grid[i][j].lower < grid[i][j - 1].lower;
      }
    }
  }
  out.result = {{"A", number(a)}, {"monotone_decreasing", monotone}};
  return out;
}

TaskOutput run_proof(const Context& ctx, Params& p) {
  const std::string analysis = p.text("analysis");
  if (analysis == "index") return proof_index(ctx, p);
  if (analysis == "kappa") return proof_kappa(ctx, p);
  if (analysis == "variance_series") return proof_variance_series(ctx, p);
  if (analysis == "chebyshev") return proof_chebyshev(ctx, p);
  if (analysis == "sandwich") return proof_sandwich(ctx, p);
  if (analysis == "slack") return proof_slack(ctx, p);
  invalid("task_params.analysis", "unknown proof analysis '" + analysis + "'");
}

// --------------------------------------------------------------- integrate

TaskOutput integrate_pospart(const Context& ctx, Params& p) {
  const double tolerance = p.real("tolerance", 1e-12);
  const std::int64_t mc_pairs = p.integer("mc_pairs", 0);
  const bool nested = p.flag("nested", false);
  p.finish();
  const GaussianPosPartMoments m = gaussian_pospart_moments(tolerance);
  const double pi = std::numbers::pi;
  TaskOutput out;
  out.result = {{"mean_pos", number(m.mean_pos)},
                {"triple_integral", number(m.triple_integral)},
                {"product_pos", number(m.product_pos)},
                {"second_moment_pos", number(m.second_moment_pos)},
                {"cov_pos", number(m.cov_pos)},
                {"var_pos", number(m.var_pos)},
                {"closed_form",
                 {{"mean_pos", number(1.0 / (2.0 * std::sqrt(2.0 * pi)))},
                  {"triple_integral", number(1.0 / (2.0 * pi))},
                  {"product_pos", number(1.0 / (4.0 * pi))},
                  {"cov_pos", number(1.0 / (8.0 * pi))},
                  {"var_pos", number(0.25 - 1.0 / (8.0 * pi))}}}};
  out.csv = CsvTable({"quantity", "value"});
  for (const auto& [key, value] :
       std::vector<std::pair<std::string, double>>{{"mean_pos", m.mean_pos},
                                                   {"triple_integral", m.triple_integral},
                                                   {"product_pos", m.product_pos},
                                                   {"second_moment_pos", m.second_moment_pos},
                                                   {"cov_pos", m.cov_pos},
                                                   {"var_pos", m.var_pos}}) {
    out.csv.add(key).add(value);
    out.csv.end_row();
  }
  if (mc_pairs > 0) {
    const PositivePartProductMc mc = gaussian_positive_product_mc(mc_pairs, ctx.seed, ctx.threads);
    const double z_triple = (mc.product_z - m.triple_integral) / mc.product_z_stderr;
    const double z_product = (mc.product_pos - m.product_pos) / mc.product_pos_stderr;
    out.result["monte_carlo"] = {{"pairs", mc_pairs},
                                 {"triple_integral", number(mc.product_z)},
                                 {"triple_integral_stderr", number(mc.product_z_stderr)},
                                 {"triple_integral_abs_z", number(std::abs(z_triple))},
                                 {"product_pos", number(mc.product_pos)},
                                 {"product_pos_stderr", number(mc.product_pos_stderr)},
                                 {"product_pos_abs_z", number(std::abs(z_product))}};
    out.csv.add(std::string("mc_triple_integral")).add(mc.product_z);
    out.csv.end_row();
    out.csv.add(std::string("mc_product_pos")).add(mc.product_pos);
    out.csv.end_row();
  }
  if (nested) {
    const QuadratureResult q = pospart_triple_integral_nested();
    out.result["nested_triple_integral"] = {{"value", number(q.value)},
                                            {"abs_error_estimate", number(q.abs_error_estimate)},
                                            {"evaluations", q.evaluations}};
    out.csv.add(std::string("nested_triple_integral")).add(q.value);
    out.csv.end_row();
  }
  return out;
}

TaskOutput integrate_cosine(const Context&, Params& p) {
  const std::int64_t i_max = p.integer("i_max", 20);
  const std::int64_t i_min = p.integer("i_min", 1);
  p.finish();
  if (i_min < 0 || i_max < i_min) invalid("task_params.i_max", "need 0 <= i_min <= i_max");
  TaskOutput out;
  out.csv = CsvTable({"i", "j", "quadrature", "analytic"});
  double off_diag = 0.0;
  double diag_dev = 0.0;
  double disagreement = 0.0;
  for (std::int64_t i = i_min; i <= i_max; ++i) {
    for (std::int64_t j = i; j <= i_max; ++j) {
      const CosineMoment c = cosine_moment(i, j);
      if (i == j) {
        diag_dev = std::max(diag_dev, std::abs(c.quadrature - (i == 0 ? 1.0 : 0.5)));
      } else {
        off_diag = std::max(off_diag, std::abs(c.quadrature));
      }
      disagreement = std::max(disagreement, std::abs(c.quadrature - c.analytic));
      out.csv.add(i).add(j).add(c.quadrature).add(c.analytic);
      out.csv.end_row();
    }
  }
  out.result = {{"i_min", i_min},
                {"i_max", i_max},
                {"max_abs_off_diagonal", number(off_diag)},
                {"max_abs_diagonal_deviation", number(diag_dev)},
                {"max_quadrature_vs_analytic", number(disagreement)}};
  return out;
}

TaskOutput integrate_function(const Context&, Params& p) {
  const std::string name = p.text("function");
  const double tolerance = p.real("tolerance", 1e-10);
  double a = 0.0;
  double b = kInf;
  Integrand f;
  double exact = 0.0;
  if (name == "exp_decay") {
    f = [](double t) { return std::exp(-t); };
    exact = 1.0;
  } else if (name == "normal_density") {
    f = normal_pdf;
    a = -kInf;
    exact = 1.0;
  } else if (name == "zero") {
    f = [](double) { return 0.0; };
    b = 1.0;
  } else {
    invalid("task_params.function", "expected exp_decay, normal_density or zero");
  }
  p.finish();
  const QuadratureResult q = integrate_1d(f, a, b, tolerance);
  TaskOutput out;
  out.result = {{"function", name},
                {"value", number(q.value)},
                {"abs_error_estimate", number(q.abs_error_estimate)},
                {"evaluations", q.evaluations},
                {"exact", number(exact)},
                {"abs_error", number(std::abs(q.value - exact))}};
  out.csv = CsvTable({"function", "value", "abs_error_estimate", "evaluations"});
  out.csv.add(name).add(q.value).add(q.abs_error_estimate).add(q.evaluations);
  out.csv.end_row();
  return out;
}

TaskOutput run_integrate(const Context& ctx, Params& p) {
  const std::string quantity = p.text("quantity");
  if (quantity == "pospart_moments") return integrate_pospart(ctx, p);
  if (quantity == "cosine_moments") return integrate_cosine(ctx, p);
  if (quantity == "function") return integrate_function(ctx, p);
  invalid("task_params.quantity", "unknown quantity '" + quantity + "'");
}

// ------------------------------------------------------------------ oracle

std::string to_decimal(DyadicProbability::Count x) {
  if (x == 0) return "0";
  std::string s;
  while (x > 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(x % 10)));
    x /= 10;
  }
  return s;
}

TaskOutput run_oracle(const Context& ctx, Params& p) {
  const std::string quantity = p.text("quantity", "step_deviation");
  if (quantity != "step_deviation") invalid("task_params.quantity", "only 'step_deviation' is available");
  std::int64_t n_min = 0;
  std::int64_t n_max = 0;
  if (p.has("n")) {
    n_min = n_max = p.integer("n");
  } else {
    n_min = p.integer("n_min");
    n_max = p.integer("n_max");
  }
  const std::int64_t mc_n = p.integer("mc_n", 0);
  const std::int64_t mc_samples = p.integer("mc_samples", 0);
  p.finish();
  if (n_min < 1 || n_max < n_min) invalid("task_params.n_min", "need 1 <= n_min <= n_max");
  if (ctx.config.family && ctx.config.family->kind() != FamilyKind::step) {
    invalid("family", "the step-deviation oracle belongs to the step family");
  }

  TaskOutput out;
  out.csv = CsvTable({"n", "probability", "numerator", "log2_denominator"});
  Json values = Json::array();
  double min_value = kInf;
  for (std::int64_t n = n_min; n <= n_max; ++n) {
    const DyadicProbability d = exact_step_deviation_dyadic(n);
    const double v = d.value();
    min_value = std::min(min_value, v);
    values.push_back({{"n", n}, {"probability", number(v)}, {"numerator", to_decimal(d.numerator)},
                      {"log2_denominator", d.exponent}});
    out.csv.add(n).add(v).add(to_decimal(d.numerator)).add(static_cast<std::int64_t>(d.exponent));
    out.csv.end_row();
  }
  if (n_min == n_max) out.result["probability"] = values[0]["probability"];
  out.result["values"] = values;
  out.result["min_probability"] = number(min_value);
  out.result["all_at_least_quarter"] = min_value >= 0.25;
  if (mc_samples > 0) {
    positive(mc_n, "mc_n");
    const SequenceFamily step = make_family(FamilyDescriptor::step());
    const ProbabilityEstimate e = estimate_event_probability(step, EventSpec::centered_sum_geq(0.5), mc_n,
                                                             mc_samples, ctx.seed, ctx.threads);
    const double exact = exact_step_deviation(mc_n);
    out.result["monte_carlo"] = {{"n", mc_n},
                                 {"samples", mc_samples},
                                 {"p_hat", number(e.p_hat)},
                                 {"stderr", number(e.std_error)},
                                 {"exact", number(exact)},
                                 {"abs_z", number(std::abs(e.p_hat - exact) / e.std_error)}};
  }
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Expectation expectation_from_json(const Json& e, std::size_t i) {
  const std::string where = "expect[" + std::to_string(i) + "]";
  if (!e.is_object() || !e.contains("path") || !e.at("path").is_string()) {
    invalid(where, "expected an object with a string 'path'");
  }
  Expectation x;
  x.path = e.at("path").get<std::string>();
  try {
    (void)Json::json_pointer(x.path);
  } catch (const std::exception&) {
    invalid(where + ".path", "not a JSON pointer");
  }
  for (const auto& item : e.items()) {
    const std::string& key = item.key();
    if (key == "path") continue;
    if (key == "equals") {
      x.equals = item.value();
    } else if (key == "min" || key == "max") {
      if (!item.value().is_number()) invalid(where + "." + key, "expected a number");
      (key == "min" ? x.min : x.max) = item.value().get<double>();
    } else {
      invalid(where + "." + key, "unknown field");
    }
  }
  if (!x.equals && !x.min && !x.max) invalid(where, "needs 'equals', 'min' or 'max'");
  return x;
}

ExpectationResult evaluate(const Expectation& e, const Json& summary) {
  ExpectationResult r;
  r.path = e.path;
  const Json::json_pointer ptr(e.path);
  if (!summary.contains(ptr)) {
    r.detail = "missing from summary";
    return r;
  }
  const Json& v = summary.at(ptr);
  r.passed = true;
  std::ostringstream detail;
  detail << "value " << v.dump();
  if (e.equals) {
    const bool same = (v.is_number() && e.equals->is_number()) ? v.get<double>() == e.equals->get<double>()
                                                               : v == *e.equals;
    r.passed = r.passed && same;
    detail << (same ? " == " : " != ") << e.equals->dump();
  }
  if (e.min || e.max) {
    if (!v.is_number()) {
      r.passed = false;
      detail << " is not a number";
    } else {
      const double x = v.get<double>();
      if (e.min) {
        r.passed = r.passed && x >= *e.min;
        detail << (x >= *e.min ? " >= " : " < ") << format_number(*e.min);
      }
      if (e.max) {
        r.passed = r.passed && x <= *e.max;
        detail << (x <= *e.max ? " <= " : " > ") << format_number(*e.max);
      }
    }
  }
  r.detail = detail.str();
  return r;
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::simulate: return "simulate";
    case Task::check: return "check";
    case Task::proof: return "proof";
    case Task::integrate: return "integrate";
    case Task::oracle: return "oracle";
  }
  return "check";
}

Task task_from_string(const std::string& name) {
  if (name == "simulate") return Task::simulate;
  if (name == "check") return Task::check;
  if (name == "proof") return Task::proof;
  if (name == "integrate") return Task::integrate;
  if (name == "oracle") return Task::oracle;
  invalid("task", "unknown task '" + name + "'");
}

ExperimentConfig parse_config(const Json& j, const std::string& default_name) {
  if (!j.is_object()) invalid("config", "expected a JSON object");
  static const std::set<std::string> known = {"name",  "task", "family",      "normalizer", "task_params",
                                              "seed",  "output_path", "expect", "description"};
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) invalid(item.key(), "unknown field");
  }
  ExperimentConfig c;
  c.raw = j;
  c.name = j.contains("name") && j.at("name").is_string() ? j.at("name").get<std::string>() : default_name;
  if (!j.contains("task") || !j.at("task").is_string()) invalid("task", "missing or not a string");
  c.task = task_from_string(j.at("task").get<std::string>());
  if (j.contains("family")) c.family = family_from_json(j.at("family"));
  if (j.contains("normalizer")) c.normalizer = normalizer_from_json(j.at("normalizer"));
  if (j.contains("task_params")) {
    if (!j.at("task_params").is_object()) invalid("task_params", "expected an object");
    c.task_params = j.at("task_params");
  }
  if (j.contains("seed")) {
    const Json& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      invalid("seed", "expected a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("output_path")) {
    if (!j.at("output_path").is_string()) invalid("output_path", "expected a string");
    c.output_path = j.at("output_path").get<std::string>();
  }
  if (j.contains("expect")) {
    if (!j.at("expect").is_array()) invalid("expect", "expected an array");
    for (std::size_t i = 0; i < j.at("expect").size(); ++i) {
      c.expect.push_back(expectation_from_json(j.at("expect")[i], i));
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config_invalid, path.string() + ": cannot be read");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::config_invalid, path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(j, path.stem().string());
}

RunManifest run_config(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::string started_at = timestamp();

  std::optional<std::uint64_t> seed = options.seed ? options.seed : config.seed;
  if (!seed) seed = options.fallback_seed;
  if (!seed) invalid("seed", "missing; set it in the config, with --seed or with LLNLAB_SEED");
  const std::filesystem::path out_dir =
      options.out_dir ? *options.out_dir
                      : (config.output_path.empty() ? std::filesystem::path("out") / config.name
                                                    : std::filesystem::path(config.output_path));

  Context ctx{config, *seed, options.threads};
  Params params(config.task_params);
  TaskOutput output;
  try {
    switch (config.task) {
      case Task::simulate: output = run_simulate(ctx, params); break;
      case Task::check: output = run_check(ctx, params); break;
      case Task::proof: output = run_proof(ctx, params); break;
      case Task::integrate: output = run_integrate(ctx, params); break;
      case Task::oracle: output = run_oracle(ctx, params); break;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config_invalid) throw;
    throw Error(ErrorKind::task_failed, std::string(e.what()));
  }

  RunManifest run;
  run.out_dir = out_dir;
  run.summary = Json::object();
  run.summary["name"] = config.name;
  run.summary["task"] = to_string(config.task);
  run.summary["tool_version"] = kToolVersion;
  run.summary["seed"] = *seed;
  if (config.family) run.summary["family"] = to_json(*config.family);
  run.summary["normalizer"] = to_json(config.normalizer);
  run.summary["task_params"] = config.task_params;
  run.summary["result"] = output.result;

  Json checks = Json::array();
  for (const Expectation& e : config.expect) {
    ExpectationResult r = evaluate(e, run.summary);
    run.passed = run.passed && r.passed;
    checks.push_back({{"path", r.path}, {"passed", r.passed}, {"detail", r.detail}});
    run.expectations.push_back(std::move(r));
  }

  write_text(out_dir / "data.csv", output.csv.str());
  write_text(out_dir / "summary.json", run.summary.dump(2) + "\n");
  run.outputs = {"data.csv", "summary.json", "manifest.json"};

  const double runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  run.manifest = Json::object();
  run.manifest["tool"] = "llnlab";
  run.manifest["version"] = kToolVersion;
  run.manifest["config"] = config.raw;
  run.manifest["seed"] = *seed;
  run.manifest["threads"] = options.threads;
  run.manifest["started_at"] = started_at;
  run.manifest["finished_at"] = timestamp();
  run.manifest["runtime_ms"] = std::round(runtime_ms);
  run.manifest["outputs"] = run.outputs;
  run.manifest["expectations"] = checks;
  run.manifest["passed"] = run.passed;
  write_text(out_dir / "manifest.json", run.manifest.dump(2) + "\n");
  return run;
}

int exit_code(const RunManifest& manifest) { return manifest.passed ? 0 : 1; }

int exit_code(const Error& error) { return error.kind() == ErrorKind::config_invalid ? 2 : 3; }

}  // namespace llnlab
