#include "llnlab/proofkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "llnlab/error.hpp"
#include "llnlab/montecarlo.hpp"
#include "llnlab/stats.hpp"

namespace llnlab {
namespace {

std::size_t idx(std::int64_t n) { return static_cast<std::size_t>(n - 1); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

/// s with epsilon s <= v < epsilon (s + 1), for v >= 0.
std::int64_t band(double v, double epsilon) {
  auto s = static_cast<std::int64_t>(std::floor(v / epsilon));
  while (s > 0 && epsilon * static_cast<double>(s) > v) --s;
  while (epsilon * static_cast<double>(s + 1) <= v) ++s;
  return s;
}

void require_s(const SubsequenceIndex& index, std::int64_t s) {
  if (s < 0 || s > index.l) {
    throw Error(ErrorKind::invalid_params,
                "s = " + std::to_string(s) + " outside 0.." + std::to_string(index.l));
  }
}

}  // namespace

std::string to_string(Sign sign) { return sign == Sign::plus ? "plus" : "minus"; }

std::int64_t floor_power(double alpha, int level) {
  return static_cast<std::int64_t>(std::floor(std::pow(alpha, level)));
}

int floor_log(double alpha, std::int64_t n) {
  const double x = static_cast<double>(n);
  int m = static_cast<int>(std::floor(std::log(x) / std::log(alpha)));
  while (m > 0 && std::pow(alpha, m) > x) --m;
  while (std::pow(alpha, m + 1) <= x) ++m;
  return m;
}

std::int64_t SubsequenceIndex::k_plus(int level, std::int64_t s_value) const {
  const auto it = cells.find({level, s_value});
  return it == cells.end() ? floor_power(alpha, level) : it->second.k_max;
}

std::int64_t SubsequenceIndex::k_minus(int level, std::int64_t s_value) const {
  const auto it = cells.find({level, s_value});
  return it == cells.end() ? floor_power(alpha, level) : it->second.k_min;
}

int SubsequenceIndex::last_complete_level() const {
  // Level n is complete when every integer k < alpha^(n+1) is <= horizon.
  int level = -1;
  while (level + 1 <= max_level &&
         std::ceil(std::pow(alpha, level + 2)) - 1.0 <= static_cast<double>(horizon)) {
    ++level;
  }
  return level;
}

SubsequenceIndex build_index(const IndexFn& mean_path, double alpha, double epsilon,
                             std::int64_t horizon, const Normalizer& normalizer,
                             std::optional<double> a) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::invalid_params, "alpha must be finite and > 1");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::invalid_params, "epsilon must be finite and > 0");
  }
  if (horizon < 1) throw Error(ErrorKind::invalid_params, "horizon must be at least 1");
  if (a && (!(*a >= 0.0) || !std::isfinite(*a))) {
    throw Error(ErrorKind::invalid_params, "A must be finite and >= 0");
  }
  normalizer.require_horizon(horizon);

  SubsequenceIndex index;
  index.alpha = alpha;
  index.epsilon = epsilon;
  index.horizon = horizon;
  index.linear_normalizer = normalizer.kind() == NormalizerKind::linear;
  const auto h = static_cast<std::size_t>(horizon);
  index.mean_path.resize(h);
  index.scaled_mean.resize(h);
  index.m.resize(h);
  index.s.resize(h);

  double sup = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double es = mean_path(n);
    const double v = es / normalizer(n);
    if (!std::isfinite(es) || !std::isfinite(v)) {
      throw Error(ErrorKind::nonfinite_mean, "E S_n is not finite at n = " + std::to_string(n));
    }
    if (v < 0.0) {
      throw Error(ErrorKind::invalid_params,
                  "E S_n / b_n is negative at n = " + std::to_string(n) + "; the family must be non-negative");
    }
    index.mean_path[idx(n)] = es;
    index.scaled_mean[idx(n)] = v;
    sup = std::max(sup, v);
  }
  index.a = a.value_or(sup);
  index.l = band(index.a, epsilon);

  for (std::int64_t n = 1; n <= horizon; ++n) {
    const std::int64_t s = band(index.scaled_mean[idx(n)], epsilon);
    if (s > index.l) {
      throw Error(ErrorKind::sup_exceeded,
                  "E S_n / b_n = " + fmt(index.scaled_mean[idx(n)]) + " at n = " + std::to_string(n) +
                      " reaches epsilon (L + 1) = " + fmt(epsilon * static_cast<double>(index.l + 1)) +
                      "; A = " + fmt(index.a) + " is too small");
    }
    const int m = floor_log(alpha, n);
    index.m[idx(n)] = m;
    index.s[idx(n)] = s;
    auto [it, inserted] = index.cells.try_emplace({m, s}, Cell{n, n});
    if (!inserted) it->second.k_max = n;  // n increases, so k_min stays the first hit
  }

  int max_level = 0;
  while (std::pow(alpha, max_level) < static_cast<double>(horizon)) ++max_level;
  index.max_level = std::max(max_level, index.m.back());
  return index;
}

InvariantCheck check_index_invariants(const SubsequenceIndex& index) {
  InvariantCheck check;
  const auto fail = [&](std::int64_t n, const std::string& what) {
    if (check.failures.size() < 100) check.failures.push_back("n = " + std::to_string(n) + ": " + what);
  };
  const double alpha = index.alpha;
  const double eps = index.epsilon;
  for (std::int64_t n = 1; n <= index.horizon; ++n) {
    ++check.checked;
    const int m = index.m_of(n);
    const std::int64_t s = index.s_of(n);
    const double x = static_cast<double>(n);
    if (!(std::pow(alpha, m) <= x && x < std::pow(alpha, m + 1))) fail(n, "alpha^m(n) <= n < alpha^(m(n)+1) fails");
    const double v = index.scaled_mean[idx(n)];
    if (!(eps * static_cast<double>(s) <= v && v < eps * static_cast<double>(s + 1))) {
      fail(n, "E S_n / b_n outside its band");
    }
    if (s < 0 || s > index.l) fail(n, "s(n) outside 0..L");
    if (!index.cell_nonempty(m, s)) fail(n, "own cell is empty");
    const std::int64_t kp = index.k_plus(m, s);
    const std::int64_t km = index.k_minus(m, s);
    if (!(km <= n && n <= kp)) fail(n, "k- <= n <= k+ fails");
    for (std::int64_t k : {km, kp}) {
      if (k < 1 || k > index.horizon) {
        fail(n, "k outside the horizon");
        continue;
      }
      if (std::abs(index.scaled_mean[idx(k)] - v) > eps) fail(n, "|E S_k / b_k - E S_n / b_n| > epsilon");
    }
  }
  for (const auto& [key, cell] : index.cells) {
    const std::int64_t floor_k = floor_power(alpha, key.first);
    if (cell.k_min < floor_k || cell.k_max < floor_k || cell.k_min > cell.k_max) {
      fail(cell.k_min, "cell (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
                           ") has k below floor(alpha^level)");
    }
  }
  return check;
}

std::vector<KappaRecord> kappa_report(const SubsequenceIndex& index, std::int64_t s, std::int64_t j_max) {
  require_s(index, s);
  if (j_max < 1) throw Error(ErrorKind::invalid_params, "j_max must be >= 1");
  const double alpha = index.alpha;
  const int complete = index.last_complete_level();
  const double q = 1.0 / (alpha * alpha);

  std::vector<KappaRecord> out;
  out.reserve(static_cast<std::size_t>(j_max));
  for (std::int64_t j = 1; j <= j_max; ++j) {
    const double jd = static_cast<double>(j);
    // First level whose indices can reach j: alpha^(n+1) >= j.
    int reach = 0;
    while (std::pow(alpha, reach + 1) < jd) ++reach;
    const int tail_start = std::max(complete + 1, reach);
    const double tail = 4.0 * std::pow(q, tail_start) / (1.0 - q);

    KappaRecord r;
    r.j = j;
    double finite[2] = {0.0, 0.0};
    for (int level = 0; level <= complete; ++level) {
      const std::int64_t kp = index.k_plus(level, s);
      const std::int64_t km = index.k_minus(level, s);
      if (kp >= j) finite[0] += 1.0 / (static_cast<double>(kp) * static_cast<double>(kp));
      if (km >= j) finite[1] += 1.0 / (static_cast<double>(km) * static_cast<double>(km));
    }
    r.kappa_plus = finite[0] + tail;
    r.kappa_minus = finite[1] + tail;
    r.kappa = std::max(r.kappa_plus, r.kappa_minus);
    r.finite_part = std::max(finite[0], finite[1]);
    r.tail_part = tail;
    r.bound = 4.0 * alpha * alpha * alpha * alpha / ((alpha * alpha - 1.0) * jd * jd);
    r.holds = r.kappa <= r.bound;
    out.push_back(r);
  }
  return out;
}

SeriesReport subsequence_variance_series(const SubsequenceIndex& index, const IndexFn& variance,
                                         Sign sign, std::int64_t s, double c) {
  require_s(index, s);
  if (!(c > 0.0)) throw Error(ErrorKind::invalid_params, "quasi-uncorrelation constant must be > 0");
  std::vector<std::int64_t> ks;
  std::int64_t k_top = 0;
  for (int level = 0; level <= index.max_level; ++level) {
    ks.push_back(index.k(sign, level, s));
    k_top = std::max(k_top, ks.back());
  }
  std::vector<double> prefix(static_cast<std::size_t>(k_top));
  CompensatedSum acc;
  for (std::int64_t j = 1; j <= k_top; ++j) {
    const double v = variance(j);
    if (std::isnan(v) || v < 0.0) {
      throw Error(ErrorKind::negative_variance, "variance at j = " + std::to_string(j) + " is " + fmt(v));
    }
    acc.add(v);
    prefix[idx(j)] = acc.value();
  }
  std::vector<double> terms;
  for (std::int64_t k : ks) {
    const double kd = static_cast<double>(k);
    terms.push_back(c * prefix[idx(k)] / (kd * kd));
  }
  return summability_report(std::move(terms));
}

bool ChebyshevReport::all_hold() const {
  return std::all_of(levels.begin(), levels.end(), [](const ChebyshevLevel& l) { return l.holds; });
}

ChebyshevReport chebyshev_report(const SequenceFamily& family, const SubsequenceIndex& index,
                                 std::int64_t s, double delta, std::int64_t replications,
                                 std::uint64_t seed, unsigned threads) {
  require_s(index, s);
  if (!(delta > 0.0)) throw Error(ErrorKind::invalid_params, "delta must be positive");
  if (replications < 100) {
    throw Error(ErrorKind::insufficient_replications, "chebyshev_report needs >= 100 replications");
  }
  const MomentProfile& profile = family.require_moments();

  struct Target {
    int level;
    Sign sign;
    std::int64_t k;
  };
  std::vector<Target> targets;
  std::int64_t k_top = 1;
  for (int level = 0; level <= index.max_level; ++level) {
    for (Sign sign : {Sign::plus, Sign::minus}) {
      targets.push_back({level, sign, index.k(sign, level, s)});
      k_top = std::max(k_top, targets.back().k);
    }
  }
  const std::size_t t = targets.size();
  const auto rows = replicate(family, k_top, replications, seed, threads, t,
                              [&](const std::vector<double>& x, std::span<double> out) {
                                std::vector<double> prefix(x.size());
                                double run = 0.0;
                                for (std::size_t i = 0; i < x.size(); ++i) prefix[i] = run += x[i];
                                for (std::size_t i = 0; i < t; ++i) out[i] = prefix[idx(targets[i].k)];
                              });

  ChebyshevReport report;
  report.delta = delta;
  report.replications = replications;
  const auto reps = static_cast<std::size_t>(replications);
  double running = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const Target& target = targets[i];
    const double kd = static_cast<double>(target.k);
    const double mean_sum = profile.mean_sum_at(target.k);
    std::vector<double> column(reps);
    std::int64_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      column[r] = rows[r * t + i];
      if (std::abs(column[r] - mean_sum) > kd * delta) ++hits;
    }
    ChebyshevLevel level;
    level.level = target.level;
    level.sign = target.sign;
    level.k = target.k;
    level.p_hat = static_cast<double>(hits) / static_cast<double>(reps);
    level.std_error = bernoulli_stderr(level.p_hat, replications);
    double variance = 0.0;
    if (profile.pairwise_uncorrelated && profile.variance) {
      variance = analytic_sum_variance(profile, target.k);
    } else {
      level.variance_analytic = false;
      variance = sample_variance(column);
    }
    level.bound = variance / (kd * kd * delta * delta);
    level.holds = level.p_hat <= level.bound + 4.0 * level.std_error;
    running += level.bound;
    report.partial_sum_of_bounds.push_back(running);
    report.levels.push_back(level);
  }
  return report;
}

SandwichReport sandwich_check(const Trajectory& trajectory, const SubsequenceIndex& index) {
  if (!index.linear_normalizer) {
    throw Error(ErrorKind::invalid_params, "sandwich_check needs an index built with b_n = n");
  }
  if (trajectory.horizon() < index.horizon) {
    throw Error(ErrorKind::horizon_mismatch,
                "trajectory horizon " + std::to_string(trajectory.horizon()) + " < index horizon " +
                    std::to_string(index.horizon));
  }
  for (std::int64_t n = 1; n <= index.horizon; ++n) {
    if (trajectory.x(n) < 0.0) {
      throw Error(ErrorKind::negativity_detected,
                  "X_" + std::to_string(n) + " = " + fmt(trajectory.x(n)) + " < 0");
    }
  }

  SandwichReport report;
  report.note = "A = " + fmt(index.a) + " (sup of E S_n / n over the horizon) bounds E S_k / k in the chain";
  report.max_residual = -std::numeric_limits<double>::infinity();
  const double alpha = index.alpha;
  const double eps = index.epsilon;
  const double a = index.a;
  report.records.reserve(static_cast<std::size_t>(index.horizon));
  for (std::int64_t n = 1; n <= index.horizon; ++n) {
    const int m = index.m_of(n);
    const std::int64_t s = index.s_of(n);
    const std::int64_t kp = index.k_plus(m, s);
    const std::int64_t km = index.k_minus(m, s);
    const double nd = static_cast<double>(n);
    const double kpd = static_cast<double>(kp);
    const double kmd = static_cast<double>(km);
    const double sn = trajectory.s(n);
    const double skp = trajectory.s(kp);
    const double skm = trajectory.s(km);
    const double esn = index.mean_sum(n);
    const double eskp = index.mean_sum(kp);
    const double eskm = index.mean_sum(km);

    SandwichRecord r;
    r.n = n;
    r.lower = -eps - (1.0 - 1.0 / alpha) * a + (skm - eskm) / (alpha * kmd);
    r.mid_lo = skm / nd - esn / nd;
    r.mid = (sn - esn) / nd;
    r.mid_hi = skp / nd - eskp / kpd + eps;
    r.upper = alpha * (skp - eskp) / kpd + (alpha - 1.0) * a + eps;

    const double chain[5] = {r.lower, r.mid_lo, r.mid, r.mid_hi, r.upper};
    for (int i = 0; i < 4; ++i) {
      const double residual = chain[i] - chain[i + 1];
      report.max_residual = std::max(report.max_residual, residual);
      if (residual > kSandwichTolerance) {
        r.violated = true;
        report.violations.push_back({n, i + 1, residual});
      }
    }
    report.records.push_back(r);
  }
  return report;
}

OuterSlack outer_slack(double alpha, double epsilon, double a) {
  if (!(alpha > 1.0) || !(epsilon > 0.0) || !(a >= 0.0)) {
    throw Error(ErrorKind::invalid_params, "outer_slack needs alpha > 1, epsilon > 0, A >= 0");
  }
  return {(alpha - 1.0) * a + epsilon, epsilon + (1.0 - 1.0 / alpha) * a};
}

}  // namespace llnlab
