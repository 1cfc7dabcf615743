#include "llnlab/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "llnlab/error.hpp"

namespace llnlab {
namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorKind::config_invalid, field + ": " + message);
}

double get_number(const Json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) invalid(where + "." + key, "expected a number");
  return j.at(key).get<double>();
}

const char* kFamilyKeys[] = {"kind", "params", "transforms", "label"};

Transform transform_from_json(const Json& t, const std::string& where) {
  std::string name;
  if (t.is_string()) {
    name = t.get<std::string>();
  } else if (t.is_object() && t.contains("kind") && t.at("kind").is_string()) {
    name = t.at("kind").get<std::string>();
  } else {
    invalid(where, "a transform is a name or an object with a 'kind'");
  }
  if (name == "truncate") return {TransformKind::truncate};
  if (name == "positive_part") return {TransformKind::positive_part};
  if (name == "negative_part") return {TransformKind::negative_part};
  if (name == "center") return {TransformKind::center};
  if (name == "essinf_shift") return {TransformKind::essinf_shift};
  if (name == "affine") {
    if (!t.is_object()) invalid(where, "affine needs an object with 'scale' and 'shift'");
    return Transform::affine(get_number(t, "scale", 1.0, where), get_number(t, "shift", 0.0, where));
  }
  invalid(where, "unknown transform '" + name + "'");
}

}  // namespace

double round12(double x) {
  if (!std::isfinite(x) || x == 0.0) return x == 0.0 ? 0.0 : x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

Json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return round12(x);
}

Json numbers(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : width_(header.size()) {
  for (const auto& h : header) add(h);
  pending_ = width_;
  end_row();
  rows_ = 0;
}

CsvTable& CsvTable::add(double x) { return add(format_number(x)); }

CsvTable& CsvTable::add(std::int64_t x) {
  if (pending_ > 0) body_ += ',';
  body_ += std::to_string(x);
  ++pending_;
  return *this;
}

CsvTable& CsvTable::add(bool x) { return add(static_cast<std::int64_t>(x ? 1 : 0)); }

CsvTable& CsvTable::add(const std::string& x) {
  if (pending_ > 0) body_ += ',';
  if (x.find_first_of(",\"\n\r") != std::string::npos) {
    body_ += '"';
    for (char c : x) {
      if (c == '"') body_ += '"';
      body_ += c;
    }
    body_ += '"';
  } else {
    body_ += x;
  }
  ++pending_;
  return *this;
}

void CsvTable::end_row() {
  if (pending_ != width_) {
    throw Error(ErrorKind::task_failed, "CSV row has " + std::to_string(pending_) + " fields, header has " +
                                            std::to_string(width_));
  }
  body_ += '\n';
  pending_ = 0;
  ++rows_;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::io_error, "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::io_error, "write to " + path.string() + " failed");
}

Json to_json(const FamilyDescriptor& d) {
  Json j;
  j["kind"] = to_string(d.base);
  Json params = Json::object();
  if (d.base == FamilyKind::iid) {
    params["base"] = to_string(d.iid.base);
    switch (d.iid.base) {
      case IidBase::exponential: params["rate"] = number(d.iid.rate); break;
      case IidBase::uniform:
        params["a"] = number(d.iid.lower);
        params["b"] = number(d.iid.upper);
        break;
      case IidBase::bernoulli_scaled:
        params["p"] = number(d.iid.probability);
        params["scale"] = number(d.iid.scale);
        break;
      case IidBase::constant: params["value"] = number(d.iid.value); break;
    }
  }
  j["params"] = params;
  Json chain = Json::array();
  for (const Transform& t : d.transforms) {
    if (t.kind == TransformKind::affine) {
      chain.push_back({{"kind", "affine"}, {"scale", number(t.scale)}, {"shift", number(t.shift)}});
    } else {
      chain.push_back(to_string(t.kind));
    }
  }
  j["transforms"] = chain;
  j["label"] = d.display_name();
  return j;
}

FamilyDescriptor family_from_json(const Json& j) {
  if (!j.is_object()) invalid("family", "expected an object");
  for (const auto& item : j.items()) {
    if (std::find(std::begin(kFamilyKeys), std::end(kFamilyKeys), item.key()) == std::end(kFamilyKeys)) {
      invalid("family." + item.key(), "unknown field");
    }
  }
  if (!j.contains("kind") || !j.at("kind").is_string()) invalid("family.kind", "missing or not a string");
  const std::string kind = j.at("kind").get<std::string>();
  const Json params = j.value("params", Json::object());
  if (!params.is_object()) invalid("family.params", "expected an object");

  FamilyDescriptor d;
  if (kind == "cosine") {
    d = FamilyDescriptor::cosine();
  } else if (kind == "gated_gaussian") {
    d = FamilyDescriptor::gated_gaussian();
  } else if (kind == "step") {
    d = FamilyDescriptor::step();
  } else if (kind == "iid") {
    if (!params.contains("base") || !params.at("base").is_string()) {
      invalid("family.params.base", "missing or not a string");
    }
    const std::string base = params.at("base").get<std::string>();
    const std::string where = "family.params";
    if (base == "exponential") {
      d = FamilyDescriptor::exponential(get_number(params, "rate", 1.0, where));
    } else if (base == "uniform") {
      d = FamilyDescriptor::uniform(get_number(params, "a", 0.0, where), get_number(params, "b", 1.0, where));
    } else if (base == "bernoulli_scaled") {
      d = FamilyDescriptor::bernoulli_scaled(get_number(params, "p", 0.5, where),
                                             get_number(params, "scale", 1.0, where));
    } else if (base == "constant") {
      d = FamilyDescriptor::constant(get_number(params, "value", 0.0, where));
    } else {
      invalid("family.params.base", "unknown i.i.d. base '" + base + "'");
    }
  } else {
    invalid("family.kind", "unknown kind '" + kind + "'");
  }
  if (j.contains("transforms")) {
    const Json& chain = j.at("transforms");
    if (!chain.is_array()) invalid("family.transforms", "expected an array");
    for (std::size_t i = 0; i < chain.size(); ++i) {
      d.transforms.push_back(transform_from_json(chain[i], "family.transforms[" + std::to_string(i) + "]"));
    }
  }
  d.label = j.contains("label") && j.at("label").is_string() ? j.at("label").get<std::string>() : "";
  try {
    d.validate();
  } catch (const Error& e) {
    invalid("family", e.what());
  }
  return d;
}

Json to_json(const Normalizer& b) {
  Json j;
  switch (b.kind()) {
    case NormalizerKind::linear: j["kind"] = "linear"; break;
    case NormalizerKind::power:
      j["kind"] = "power";
      j["p"] = number(b.exponent());
      break;
    case NormalizerKind::explicit_values:
      j["kind"] = "explicit";
      j["values"] = numbers(b.values());
      break;
  }
  return j;
}

Normalizer normalizer_from_json(const Json& j) {
  if (j.is_null()) return Normalizer::linear();
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    invalid("normalizer", "expected an object with a 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "linear") return Normalizer::linear();
    if (kind == "power") {
      if (!j.contains("p")) invalid("normalizer.p", "missing");
      return Normalizer::power(get_number(j, "p", 1.0, "normalizer"));
    }
    if (kind == "explicit") {
      if (!j.contains("values") || !j.at("values").is_array()) invalid("normalizer.values", "expected an array");
      std::vector<double> values;
      for (const auto& v : j.at("values")) {
        if (!v.is_number()) invalid("normalizer.values", "expected numbers");
        values.push_back(v.get<double>());
      }
      return Normalizer::explicit_values(std::move(values));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config_invalid) throw;
    invalid("normalizer", e.what());
  }
  invalid("normalizer.kind", "unknown kind '" + kind + "'");
}

Json summary_json(const SeriesReport& r) {
  Json j;
  j["horizon"] = r.horizon;
  j["verdict"] = to_string(r.verdict);
  j["verdict_basis"] = r.verdict_basis;
  j["head_statistic"] = number(r.head_statistic);
  j["tail_statistic"] = number(r.tail_statistic);
  j["threshold"] = number(r.threshold);
  j["first_term"] = number(r.terms.empty() ? 0.0 : r.terms.front());
  j["last_term"] = number(r.terms.empty() ? 0.0 : r.terms.back());
  j["final_partial_sum"] = number(r.partial_sums.empty() ? 0.0 : r.partial_sums.back());
  double max_sum = r.partial_sums.empty() ? 0.0 : r.partial_sums.front();
  for (double s : r.partial_sums) max_sum = std::max(max_sum, s);
  j["max_partial_sum"] = number(max_sum);
  return j;
}

CsvTable series_csv(const SeriesReport& r) {
  CsvTable t({"n", "term", "partial_sum"});
  for (std::size_t i = 0; i < r.terms.size(); ++i) {
    t.add(static_cast<std::int64_t>(i + 1)).add(r.terms[i]).add(r.partial_sums[i]);
    t.end_row();
  }
  return t;
}

Json summary_json(const RatioReport& r) {
  Json j;
  j["replications"] = r.replications;
  j["analytic_denominator"] = r.analytic_denominator;
  j["c_hat"] = number(r.c_hat);
  Json points = Json::array();
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) {
    points.push_back({{"n", r.n_grid[i]},
                      {"ratio", number(r.ratios[i])},
                      {"stderr", number(r.stderrs[i])},
                      {"sum_variance", number(r.sum_variances[i])},
                      {"variance_sum", number(r.variance_sums[i])}});
  }
  j["points"] = points;
  return j;
}

CsvTable ratio_csv(const RatioReport& r) {
  CsvTable t({"n", "ratio", "stderr"});
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) {
    t.add(r.n_grid[i]).add(r.ratios[i]).add(r.stderrs[i]);
    t.end_row();
  }
  return t;
}

Json summary_json(const ExperimentResult& r) {
  Json j;
  j["family"] = to_json(r.descriptor);
  j["normalizer"] = r.normalizer;
  j["master_seed"] = r.master_seed;
  j["replications"] = r.replications;
  j["tolerance"] = number(r.tolerance);
  Json rows = Json::array();
  double min_frac = 1.0;
  for (const CheckpointStats& s : r.per_checkpoint) {
    rows.push_back({{"checkpoint", s.n},
                    {"mean_dev", number(s.mean_dev)},
                    {"stddev", number(s.stddev)},
                    {"q05", number(s.q05)},
                    {"q50", number(s.q50)},
                    {"q95", number(s.q95)},
                    {"frac_within_tol", number(s.frac_within_tol)},
                    {"frac_zero_sum", number(s.frac_zero_sum)}});
    min_frac = std::min(min_frac, s.frac_within_tol);
  }
  j["checkpoints"] = rows;
  j["min_frac_within_tol"] = number(min_frac);
  return j;
}

CsvTable experiment_csv(const ExperimentResult& r) {
  CsvTable t({"checkpoint", "mean_dev", "stddev", "q05", "q50", "q95", "frac_within_tol"});
  for (const CheckpointStats& s : r.per_checkpoint) {
    t.add(s.n).add(s.mean_dev).add(s.stddev).add(s.q05).add(s.q50).add(s.q95).add(s.frac_within_tol);
    t.end_row();
  }
  return t;
}

Json summary_json(const SandwichReport& r) {
  Json j;
  j["n_checked"] = static_cast<std::int64_t>(r.records.size());
  j["violations"] = static_cast<std::int64_t>(r.violations.size());
  j["max_residual"] = number(r.max_residual);
  j["tolerance"] = number(kSandwichTolerance);
  j["note"] = r.note;
  return j;
}

CsvTable sandwich_csv(const SandwichReport& r) {
  CsvTable t({"n", "lower", "mid_lo", "mid", "mid_hi", "upper", "violated"});
  for (const SandwichRecord& x : r.records) {
    t.add(x.n).add(x.lower).add(x.mid_lo).add(x.mid).add(x.mid_hi).add(x.upper).add(x.violated);
    t.end_row();
  }
  return t;
}

Json summary_json(const ProbabilityEstimate& e) {
  return {{"p_hat", number(e.p_hat)},
          {"stderr", number(e.std_error)},
          {"ci95", {number(e.ci95.lower), number(e.ci95.upper)}},
          {"hits", e.hits},
          {"trials", e.trials}};
}

Json summary_json(const DependenceProbe& p) {
  return {{"p_joint", number(p.p_joint)},
          {"p_i", number(p.p_i)},
          {"p_j", number(p.p_j)},
          {"p_cond", number(p.p_cond)},
          {"p_cond_stderr", number(p.p_cond_stderr)},
          {"independence_gap", number(p.independence_gap)},
          {"gap_stderr", number(p.gap_stderr)},
          {"samples", p.samples}};
}

Json summary_json(const ChebyshevCheck& c) {
  return {{"p_hat", number(c.p_hat)},
          {"stderr", number(c.std_error)},
          {"bound", number(c.bound)},
          {"variance_sum", number(c.variance_sum)},
          {"variance_analytic", c.variance_analytic},
          {"holds_within_noise", c.holds_within_noise}};
}

}  // namespace llnlab
