#include "llnlab/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "llnlab/error.hpp"
#include "llnlab/montecarlo.hpp"
#include "llnlab/quadrature.hpp"
#include "llnlab/rng.hpp"
#include "llnlab/stats.hpp"

namespace llnlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t idx(std::int64_t n) { return static_cast<std::size_t>(n - 1); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::vector<double> running_sums(const std::vector<double>& terms) {
  std::vector<double> sums(terms.size());
  double running = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    running += terms[i];
    sums[i] = running;
  }
  return sums;
}

}  // namespace

Normalizer Normalizer::linear() { return Normalizer(); }

Normalizer Normalizer::power(double exponent) {
  if (!(exponent > 0.0) || !std::isfinite(exponent)) {
    throw Error(ErrorKind::invalid_params, "power normalizer needs a finite exponent > 0");
  }
  Normalizer b;
  b.kind_ = NormalizerKind::power;
  b.exponent_ = exponent;
  return b;
}

Normalizer Normalizer::explicit_values(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::invalid_params, "explicit normalizer is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw Error(ErrorKind::invalid_params,
                  "normalizer value b_" + std::to_string(i + 1) + " must be positive and finite");
    }
    if (i > 0 && values[i] < values[i - 1]) {
      throw Error(ErrorKind::invalid_params,
                  "normalizer decreases at b_" + std::to_string(i + 1));
    }
  }
  Normalizer b;
  b.kind_ = NormalizerKind::explicit_values;
  b.values_ = std::move(values);
  return b;
}

double Normalizer::operator()(std::int64_t n) const {
  if (n < 1) throw Error(ErrorKind::invalid_params, "normalizer index must be at least 1");
  switch (kind_) {
    case NormalizerKind::linear: return static_cast<double>(n);
    case NormalizerKind::power: return std::pow(static_cast<double>(n), exponent_);
    case NormalizerKind::explicit_values:
      if (static_cast<std::size_t>(n) > values_.size()) {
        throw Error(ErrorKind::invalid_params,
                    "explicit normalizer has no value for n = " + std::to_string(n));
      }
      return values_[idx(n)];
  }
  return static_cast<double>(n);
}

void Normalizer::require_horizon(std::int64_t horizon) const {
  if (kind_ == NormalizerKind::explicit_values && static_cast<std::size_t>(horizon) > values_.size()) {
    throw Error(ErrorKind::invalid_params, "explicit normalizer has " +
                                               std::to_string(values_.size()) +
                                               " values but the horizon is " + std::to_string(horizon));
  }
}

std::string Normalizer::name() const {
  switch (kind_) {
    case NormalizerKind::linear: return "linear";
    case NormalizerKind::power: return "power(" + fmt(exponent_) + ")";
    case NormalizerKind::explicit_values: return "explicit[" + std::to_string(values_.size()) + "]";
  }
  return "linear";
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::converges_evidence: return "converges_evidence";
    case Verdict::diverges_evidence: return "diverges_evidence";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

SeriesReport summability_report(std::vector<double> terms, double divergence_floor) {
  SeriesReport r;
  r.horizon = static_cast<std::int64_t>(terms.size());
  r.partial_sums = running_sums(terms);
  r.terms = std::move(terms);
  r.threshold = divergence_floor;

  const std::int64_t h = r.horizon;
  const std::int64_t head_end = (h + 1) / 2;
  if (h < 2) {
    r.verdict_basis = "horizon too short for a verdict";
    return r;
  }
  double head_max = 0.0;
  double tail_max = 0.0;
  double tail_min = kInf;
  for (std::int64_t n = 1; n <= h; ++n) {
    const double term = r.terms[idx(n)];
    const double g = term * std::pow(static_cast<double>(n), kSummabilityExponent);
    if (n <= head_end) {
      head_max = std::max(head_max, g);
    } else {
      tail_max = std::max(tail_max, g);
      tail_min = std::min(tail_min, term);
    }
  }
  r.head_statistic = head_max;
  r.tail_statistic = tail_max;
  if (tail_max <= head_max) {
    r.verdict = Verdict::converges_evidence;
    r.verdict_basis = "max of term*n^1.1 over the last half (" + fmt(tail_max) +
                      ") <= its max over the first half (" + fmt(head_max) + ")";
  } else if (tail_min > divergence_floor) {
    r.verdict = Verdict::diverges_evidence;
    r.tail_statistic = tail_min;
    r.verdict_basis = "term*n^1.1 keeps growing and min term over the last half (" + fmt(tail_min) +
                      ") > floor " + fmt(divergence_floor);
  } else {
    r.verdict_basis = "term*n^1.1 keeps growing but terms fall below floor " + fmt(divergence_floor);
  }
  return r;
}

SeriesReport boundedness_report(std::vector<double> terms) {
  SeriesReport r;
  r.horizon = static_cast<std::int64_t>(terms.size());
  r.partial_sums = running_sums(terms);
  r.terms = std::move(terms);
  r.threshold = 10.0;
  const std::size_t h = r.terms.size();
  if (h < 2) {
    r.verdict_basis = "horizon too short for a verdict";
    return r;
  }
  const std::size_t head_end = (h + 1) / 2;
  const double head_median =
      median(std::vector<double>(r.terms.begin(), r.terms.begin() + static_cast<std::ptrdiff_t>(head_end)));
  const double tail_max =
      *std::max_element(r.terms.begin() + static_cast<std::ptrdiff_t>(head_end), r.terms.end());
  r.head_statistic = head_median;
  r.tail_statistic = tail_max;
  const bool bounded = tail_max <= 10.0 * head_median;
  r.verdict = bounded ? Verdict::converges_evidence : Verdict::diverges_evidence;
  r.verdict_basis = "max over the last half (" + fmt(tail_max) + (bounded ? ") <= " : ") > ") +
                    "10 x median of the first half (" + fmt(head_median) + ")";
  return r;
}

SeriesReport kolmogorov_series(const IndexFn& variance, const Normalizer& normalizer,
                               std::int64_t horizon, double divergence_floor) {
  if (horizon < 10) throw Error(ErrorKind::invalid_params, "kolmogorov_series needs horizon >= 10");
  normalizer.require_horizon(horizon);
  std::vector<double> terms(static_cast<std::size_t>(horizon));
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double v = variance(n);
    if (std::isnan(v) || v < 0.0) {
      throw Error(ErrorKind::negative_variance,
                  "variance at n = " + std::to_string(n) + " is " + fmt(v));
    }
    const double b = normalizer(n);
    terms[idx(n)] = v / (b * b);
  }
  return summability_report(std::move(terms), divergence_floor);
}

RatioReport quasi_uncorrelation_ratio(const SequenceFamily& family,
                                      const std::vector<std::int64_t>& n_grid,
                                      std::int64_t replications, std::uint64_t seed,
                                      unsigned threads) {
  if (replications < 100) {
    throw Error(ErrorKind::insufficient_replications,
                "quasi_uncorrelation_ratio needs at least 100 replications");
  }
  if (n_grid.empty()) throw Error(ErrorKind::invalid_params, "n_grid is empty");
  for (std::int64_t n : n_grid) {
    if (n < 1) throw Error(ErrorKind::invalid_params, "grid points must be >= 1");
  }
  const std::int64_t horizon = *std::max_element(n_grid.begin(), n_grid.end());
  const std::size_t g = n_grid.size();
  const bool analytic = family.moments() && family.moments()->variance;

  // Per replication: S_n at each grid point.
  const auto per_rep = replicate(
      family, horizon, replications, seed, threads, g,
      [&](const std::vector<double>& x, std::span<double> out) {
        std::vector<double> prefix(x.size());
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) prefix[i] = s += x[i];
        for (std::size_t i = 0; i < g; ++i) out[i] = prefix[idx(n_grid[i])];
      });

  std::vector<double> variance_by_index(static_cast<std::size_t>(horizon));
  if (analytic) {
    for (std::int64_t k = 1; k <= horizon; ++k) variance_by_index[idx(k)] = family.moments()->variance(k);
  } else {
    const auto sums = replicate_sums(
        family, horizon, replications, seed, threads, 2 * static_cast<std::size_t>(horizon),
        [](const std::vector<double>& x, std::span<double> acc) {
          for (std::size_t i = 0; i < x.size(); ++i) {
            acc[2 * i] += x[i];
            acc[2 * i + 1] += x[i] * x[i];
          }
        });
    const double r = static_cast<double>(replications);
    for (std::size_t i = 0; i < variance_by_index.size(); ++i) {
      const double m = sums[2 * i] / r;
      variance_by_index[i] = std::max(0.0, (sums[2 * i + 1] - r * m * m) / (r - 1.0));
    }
  }

  RatioReport report;
  report.n_grid = n_grid;
  report.analytic_denominator = analytic;
  report.replications = replications;
  const auto reps = static_cast<std::size_t>(replications);
  for (std::size_t i = 0; i < g; ++i) {
    CompensatedSum denom;
    for (std::int64_t k = 1; k <= n_grid[i]; ++k) denom.add(variance_by_index[idx(k)]);
    const double d = denom.value();

    std::vector<double> column(reps);
    for (std::size_t r = 0; r < reps; ++r) column[r] = per_rep[r * g + i];
    const double v = sample_variance(column);

    std::vector<double> batch_ratios;
    for (std::int64_t b = 0; b < kRatioBatches; ++b) {
      const std::size_t lo = reps * static_cast<std::size_t>(b) / kRatioBatches;
      const std::size_t hi = reps * static_cast<std::size_t>(b + 1) / kRatioBatches;
      const double vb = sample_variance(std::span<const double>(column).subspan(lo, hi - lo));
      batch_ratios.push_back(d > 0.0 ? vb / d : 0.0);
    }
    const double ratio = d > 0.0 ? v / d : (v == 0.0 ? 1.0 : kInf);
    report.ratios.push_back(ratio);
    report.stderrs.push_back(std::sqrt(sample_variance(batch_ratios) / kRatioBatches));
    report.sum_variances.push_back(v);
    report.variance_sums.push_back(d);
  }
  report.c_hat = *std::max_element(report.ratios.begin(), report.ratios.end());
  return report;
}

ScaledMeanSup scaled_mean_sup(const SequenceFamily& family, const Normalizer& normalizer,
                              std::int64_t horizon, const std::optional<MonteCarloFallback>& fallback) {
  if (horizon < 1) throw Error(ErrorKind::invalid_params, "horizon must be at least 1");
  normalizer.require_horizon(horizon);
  ScaledMeanSup r;
  std::vector<double> path;
  if (family.moments()) {
    path = family.moments()->mean_path(horizon);
  } else if (fallback) {
    r.analytic = false;
    path = replicate_sums(family, horizon, fallback->replications, fallback->seed, fallback->threads,
                          static_cast<std::size_t>(horizon),
                          [](const std::vector<double>& x, std::span<double> acc) {
                            double s = 0.0;
                            for (std::size_t i = 0; i < x.size(); ++i) {
                              s += x[i];
                              acc[i] += s;
                            }
                          });
    for (double& v : path) v /= static_cast<double>(fallback->replications);
  } else {
    family.require_moments();
  }

  r.series.resize(path.size());
  double head_max = -kInf;
  double tail_max = -kInf;
  const std::int64_t head_end = (horizon + 1) / 2;
  r.a_hat = -kInf;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double v = path[idx(n)] / normalizer(n);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::nonfinite_mean, "E S_n / b_n is not finite at n = " + std::to_string(n));
    }
    r.series[idx(n)] = v;
    if (v > r.a_hat) {
      r.a_hat = v;
      r.argmax_n = n;
    }
    (n <= head_end ? head_max : tail_max) = std::max(n <= head_end ? head_max : tail_max, v);
  }
  // A sup that is still climbing by more than 1% over the second half of the
  // horizon is reported as unbounded.
  if (horizon >= 2) {
    r.bounded_evidence = tail_max <= head_max + 0.01 * std::abs(head_max) + 1e-12;
  }
  return r;
}

TailIntegral cg_tail_integral(const std::function<double(double)>& tail_sup, double t_max,
                              double tolerance) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw Error(ErrorKind::invalid_params, "t_max must be positive and finite");
  }
  if (!(tolerance > 0.0)) throw Error(ErrorKind::invalid_params, "tolerance must be positive");

  constexpr int kProbePoints = 1000;
  double previous = kInf;
  for (int i = 0; i <= kProbePoints; ++i) {
    const double t = t_max * i / kProbePoints;
    const double v = tail_sup(t);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::invalid_params, "tail value " + fmt(v) + " at t = " + fmt(t) +
                                                 " is outside [0, 1]");
    }
    if (v > previous + tolerance) {
      throw Error(ErrorKind::nonmonotone_tail,
                  "tail increases from " + fmt(previous) + " to " + fmt(v) + " near t = " + fmt(t));
    }
    previous = v;
  }

  TailIntegral r;
  const QuadratureResult body = integrate_1d(tail_sup, 0.0, t_max, tolerance);
  r.value = body.value;
  r.error_estimate = body.abs_error_estimate;

  constexpr std::int64_t kRemainderBudget = 200'000;
  try {
    const QuadratureResult rest = integrate_adaptive(tail_sup, t_max, kInf, tolerance, kRemainderBudget);
    r.converges = rest.converged;
    r.truncation_bound = rest.converged ? rest.value + rest.abs_error_estimate : kInf;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::nonfinite_integrand) throw;
    r.converges = false;
    r.truncation_bound = kInf;
  }
  return r;
}

SupTail sup_tail_over_horizon(const SequenceFamily& family, std::int64_t horizon) {
  if (horizon < 1) throw Error(ErrorKind::invalid_params, "horizon must be at least 1");
  const MomentProfile& p = family.require_moments();
  if (!p.tail) throw Error(ErrorKind::moments_unavailable, "family has no analytic tail");
  if (!p.nonnegative()) {
    throw Error(ErrorKind::negativity_detected,
                "sup_tail_over_horizon needs a non-negative family; |X_n| has no analytic tail here");
  }
  SupTail s;
  s.horizon = horizon;
  s.fn = [tail = p.tail, horizon](double t) {
    double best = 0.0;
    for (std::int64_t n = 1; n <= horizon; ++n) best = std::max(best, tail(n, t));
    return best;
  };
  return s;
}

SeriesReport mean_abs_deviation_rate(const SequenceFamily& family, std::int64_t horizon,
                                     std::int64_t replications, std::uint64_t seed, unsigned threads) {
  if (replications < 100) {
    throw Error(ErrorKind::insufficient_replications,
                "mean_abs_deviation_rate needs at least 100 replications");
  }
  if (horizon < 1) throw Error(ErrorKind::invalid_params, "horizon must be at least 1");
  const auto h = static_cast<std::size_t>(horizon);
  const double reps = static_cast<double>(replications);

  std::vector<double> means(h);
  if (family.moments()) {
    for (std::int64_t n = 1; n <= horizon; ++n) means[idx(n)] = family.moments()->mean(n);
  } else {
    means = replicate_sums(family, horizon, replications, seed, threads, h,
                           [](const std::vector<double>& x, std::span<double> acc) {
                             for (std::size_t i = 0; i < x.size(); ++i) acc[i] += x[i];
                           });
    for (double& m : means) m /= reps;
  }
  std::vector<double> abs_dev =
      replicate_sums(family, horizon, replications, seed, threads, h,
                     [&means](const std::vector<double>& x, std::span<double> acc) {
                       for (std::size_t i = 0; i < x.size(); ++i) acc[i] += std::abs(x[i] - means[i]);
                     });
  std::vector<double> terms(h);
  double running = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    running += abs_dev[idx(n)] / reps;
    terms[idx(n)] = running / static_cast<double>(n);
  }
  return boundedness_report(std::move(terms));
}

TruncationGapReport truncation_gap_report(const SequenceFamily& family, std::int64_t horizon,
                                          std::int64_t replications, std::uint64_t seed,
                                          unsigned threads) {
  if (horizon < 1) throw Error(ErrorKind::invalid_params, "horizon must be at least 1");
  const auto h = static_cast<std::size_t>(horizon);
  const auto& profile = family.moments();
  if (profile && profile->essinf) {
    for (std::int64_t n = 1; n <= horizon; ++n) {
      if (profile->essinf(n) < 0.0) {
        throw Error(ErrorKind::negativity_detected,
                    "essential infimum is negative at n = " + std::to_string(n));
      }
    }
  }
  // Sampled check, also for families with an analytic profile.
  const std::int64_t probes = std::min<std::int64_t>(std::max<std::int64_t>(replications, 1), 16);
  std::vector<double> values;
  for (std::int64_t r = 0; r < probes; ++r) {
    family.sample_values(horizon, replication_seed(seed, static_cast<std::uint64_t>(r)), values);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] < 0.0) {
        throw Error(ErrorKind::negativity_detected,
                    "sampled X_" + std::to_string(i + 1) + " = " + fmt(values[i]) + " < 0");
      }
    }
  }

  TruncationGapReport r;
  r.l1_gaps.resize(h);
  std::vector<double> mismatch(h);
  if (profile && profile->tail) {
    r.closed_form = true;
    for (std::int64_t n = 1; n <= horizon; ++n) {
      const double k = static_cast<double>(n);
      const double p = profile->tail(n, k);
      mismatch[idx(n)] = p;
      // E X 1{X > k} = k P(X > k) + int_k^inf P(X > t) dt.
      const auto rest = integrate_relative([&](double t) { return profile->tail(n, t); }, k, kInf,
                                           1e-300, 1e-10);
      r.l1_gaps[idx(n)] = rest.converged ? k * p + rest.value : kInf;
    }
  } else {
    if (replications < 100) {
      throw Error(ErrorKind::insufficient_replications,
                  "Monte Carlo truncation diagnostics need at least 100 replications");
    }
    const auto sums = replicate_sums(family, horizon, replications, seed, threads, 2 * h,
                                     [](const std::vector<double>& x, std::span<double> acc) {
                                       for (std::size_t i = 0; i < x.size(); ++i) {
                                         if (x[i] > static_cast<double>(i + 1)) {
                                           acc[2 * i] += x[i];
                                           acc[2 * i + 1] += 1.0;
                                         }
                                       }
                                     });
    const double reps = static_cast<double>(replications);
    for (std::size_t i = 0; i < h; ++i) {
      r.l1_gaps[i] = sums[2 * i] / reps;
      mismatch[i] = sums[2 * i + 1] / reps;
    }
  }
  r.mismatch_prob_partial_sums = running_sums(mismatch);
  const std::vector<double> gap_sums = running_sums(r.l1_gaps);
  r.cesaro_gap.resize(h);
  for (std::int64_t n = 1; n <= horizon; ++n) {
    r.cesaro_gap[idx(n)] = gap_sums[idx(n)] / static_cast<double>(n);
  }
  return r;
}

BaselBound basel_tail_bound(std::int64_t k) {
  if (k < 1) throw Error(ErrorKind::invalid_params, "basel_tail_bound needs k >= 1");
  CompensatedSum head;
  for (std::int64_t j = 1; j < k; ++j) {
    const double x = static_cast<double>(j);
    head.add(1.0 / (x * x));
  }
  const double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
  BaselBound b;
  b.tail_value = zeta2 - head.value();
  b.bound = zeta2 / static_cast<double>(k);
  b.holds = b.tail_value <= b.bound;
  return b;
}

std::vector<BaselBound> basel_tail_bounds(std::int64_t k_max) {
  if (k_max < 1) throw Error(ErrorKind::invalid_params, "basel_tail_bounds needs k_max >= 1");
  const double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
  std::vector<BaselBound> out;
  out.reserve(static_cast<std::size_t>(k_max));
  CompensatedSum head;
  for (std::int64_t k = 1; k <= k_max; ++k) {
    BaselBound b;
    b.tail_value = zeta2 - head.value();
    b.bound = zeta2 / static_cast<double>(k);
    b.holds = b.tail_value <= b.bound;
    out.push_back(b);
    const double x = static_cast<double>(k);
    head.add(1.0 / (x * x));
  }
  return out;
}

}  // namespace llnlab
