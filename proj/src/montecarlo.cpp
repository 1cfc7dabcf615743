#include "llnlab/montecarlo.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "llnlab/error.hpp"
#include "llnlab/parallel.hpp"
#include "llnlab/rng.hpp"

namespace llnlab {
namespace {

constexpr std::size_t kWaveChunks = 32;

std::size_t chunk_count(std::int64_t replications) {
  return static_cast<std::size_t>((replications + kReplicationChunk - 1) / kReplicationChunk);
}

void run_chunk(const SequenceFamily& family, std::int64_t horizon, std::int64_t replications,
               std::uint64_t seed, std::size_t chunk,
               const std::function<void(std::int64_t, const std::vector<double>&)>& body) {
  std::vector<double> values;
  const std::int64_t begin = static_cast<std::int64_t>(chunk) * kReplicationChunk;
  const std::int64_t end = std::min(replications, begin + kReplicationChunk);
  for (std::int64_t r = begin; r < end; ++r) {
    family.sample_values(horizon, replication_seed(seed, static_cast<std::uint64_t>(r)), values);
    body(r, values);
  }
}

void require_positive(std::int64_t replications) {
  if (replications < 1) {
    throw Error(ErrorKind::insufficient_replications, "at least one replication is required");
  }
}

/// S_n - E S_n >= t n, etc., on one sampled path. mean_sum is E S_n.
bool event_holds(const EventSpec& e, const std::vector<double>& x, std::int64_t n, double sum,
                 double mean_sum) {
  switch (e.kind) {
    case EventKind::centered_sum_geq: return sum - mean_sum >= e.threshold * static_cast<double>(n);
    case EventKind::scaled_mean_outside:
      return std::abs(sum / static_cast<double>(n) - e.center) > e.delta;
    case EventKind::value_gt: return x[static_cast<std::size_t>(e.index - 1)] > e.threshold;
    case EventKind::conditional: break;
  }
  return false;
}

bool needs_mean(const EventSpec& e) {
  if (e.kind == EventKind::conditional) return needs_mean(*e.condition) || needs_mean(*e.target);
  return e.kind == EventKind::centered_sum_geq;
}

}  // namespace

std::vector<double> replicate(const SequenceFamily& family, std::int64_t horizon,
                              std::int64_t replications, std::uint64_t seed, unsigned threads,
                              std::size_t width, const ReplicationFeatures& features) {
  require_positive(replications);
  std::vector<double> out(static_cast<std::size_t>(replications) * width, 0.0);
  parallel_for(chunk_count(replications), threads, [&](std::size_t c) {
    run_chunk(family, horizon, replications, seed, c, [&](std::int64_t r, const std::vector<double>& x) {
      features(x, std::span<double>(out).subspan(static_cast<std::size_t>(r) * width, width));
    });
  });
  return out;
}

std::vector<double> replicate_sums(const SequenceFamily& family, std::int64_t horizon,
                                   std::int64_t replications, std::uint64_t seed, unsigned threads,
                                   std::size_t width, const ReplicationFeatures& add) {
  require_positive(replications);
  const std::size_t chunks = chunk_count(replications);
  std::vector<double> total(width, 0.0);
  for (std::size_t wave = 0; wave < chunks; wave += kWaveChunks) {
    const std::size_t count = std::min(kWaveChunks, chunks - wave);
    std::vector<std::vector<double>> partial(count, std::vector<double>(width, 0.0));
    parallel_for(count, threads, [&](std::size_t c) {
      run_chunk(family, horizon, replications, seed, wave + c,
                [&](std::int64_t, const std::vector<double>& x) { add(x, partial[c]); });
    });
    for (const auto& p : partial) {
      for (std::size_t i = 0; i < width; ++i) total[i] += p[i];
    }
  }
  return total;
}

ExperimentResult run_lln_experiment(const SequenceFamily& family, const Normalizer& normalizer,
                                    const std::vector<std::int64_t>& checkpoints,
                                    std::int64_t replications, double tolerance,
                                    std::uint64_t master_seed, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  if (replications < 30) {
    throw Error(ErrorKind::insufficient_replications, "run_lln_experiment needs >= 30 replications");
  }
  if (checkpoints.empty()) throw Error(ErrorKind::invalid_params, "no checkpoints given");
  if (checkpoints.front() < 1) throw Error(ErrorKind::invalid_params, "checkpoints must be >= 1");
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i] <= checkpoints[i - 1]) {
      throw Error(ErrorKind::checkpoint_unsorted, "checkpoints must be strictly ascending");
    }
  }
  if (!(tolerance >= 0.0)) throw Error(ErrorKind::invalid_params, "tolerance must be >= 0");
  const MomentProfile& profile = family.require_moments();
  const std::int64_t horizon = checkpoints.back();
  normalizer.require_horizon(horizon);

  const std::size_t c = checkpoints.size();
  std::vector<double> mean_sums(c);
  std::vector<double> scales(c);
  for (std::size_t i = 0; i < c; ++i) {
    mean_sums[i] = profile.mean_sum_at(checkpoints[i]);
    scales[i] = normalizer(checkpoints[i]);
  }

  // Two columns per checkpoint: the deviation and S_n itself.
  const auto rows = replicate(family, horizon, replications, master_seed, threads, 2 * c,
                              [&](const std::vector<double>& x, std::span<double> out) {
                                double s = 0.0;
                                std::size_t next = 0;
                                for (std::int64_t n = 1; n <= horizon; ++n) {
                                  s += x[static_cast<std::size_t>(n - 1)];
                                  if (n == checkpoints[next]) {
                                    out[2 * next] = (s - mean_sums[next]) / scales[next];
                                    out[2 * next + 1] = s;
                                    ++next;
                                  }
                                }
                              });

  ExperimentResult result;
  result.descriptor = family.descriptor();
  result.normalizer = normalizer.name();
  result.master_seed = master_seed;
  result.replications = replications;
  result.tolerance = tolerance;
  result.checkpoints = checkpoints;
  const auto reps = static_cast<std::size_t>(replications);
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<double> dev(reps);
    std::size_t within = 0;
    std::size_t zero = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      dev[r] = rows[r * 2 * c + 2 * i];
      if (std::abs(dev[r]) <= tolerance) ++within;
      if (rows[r * 2 * c + 2 * i + 1] == 0.0) ++zero;
    }
    CheckpointStats s;
    s.n = checkpoints[i];
    s.mean_dev = mean(dev);
    s.stddev = std::sqrt(sample_variance(dev));
    std::sort(dev.begin(), dev.end());
    s.q05 = quantile_sorted(dev, 0.05);
    s.q50 = quantile_sorted(dev, 0.50);
    s.q95 = quantile_sorted(dev, 0.95);
    s.frac_within_tol = static_cast<double>(within) / static_cast<double>(reps);
    s.frac_zero_sum = static_cast<double>(zero) / static_cast<double>(reps);
    result.per_checkpoint.push_back(s);
  }
  result.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::centered_sum_geq: return "centered_sum_geq";
    case EventKind::scaled_mean_outside: return "scaled_mean_outside";
    case EventKind::value_gt: return "value_gt";
    case EventKind::conditional: return "conditional";
  }
  return "unknown";
}

EventSpec EventSpec::centered_sum_geq(double threshold) {
  EventSpec e;
  e.kind = EventKind::centered_sum_geq;
  e.threshold = threshold;
  return e;
}

EventSpec EventSpec::scaled_mean_outside(double center, double delta) {
  EventSpec e;
  e.kind = EventKind::scaled_mean_outside;
  e.center = center;
  e.delta = delta;
  return e;
}

EventSpec EventSpec::value_gt(std::int64_t index, double threshold) {
  EventSpec e;
  e.kind = EventKind::value_gt;
  e.index = index;
  e.threshold = threshold;
  return e;
}

EventSpec EventSpec::conditional(EventSpec condition, EventSpec target) {
  EventSpec e;
  e.kind = EventKind::conditional;
  e.condition = std::make_shared<const EventSpec>(std::move(condition));
  e.target = std::make_shared<const EventSpec>(std::move(target));
  return e;
}

void EventSpec::validate() const {
  switch (kind) {
    case EventKind::centered_sum_geq:
      if (!std::isfinite(threshold)) throw Error(ErrorKind::invalid_params, "threshold must be finite");
      break;
    case EventKind::scaled_mean_outside:
      if (!std::isfinite(center)) throw Error(ErrorKind::invalid_params, "center must be finite");
      if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw Error(ErrorKind::invalid_params, "delta must be positive and finite");
      }
      break;
    case EventKind::value_gt:
      if (!std::isfinite(threshold)) throw Error(ErrorKind::invalid_params, "threshold must be finite");
      if (index < 1) throw Error(ErrorKind::invalid_params, "value_gt index must be >= 1");
      break;
    case EventKind::conditional:
      if (!condition || !target) {
        throw Error(ErrorKind::invalid_params, "conditional event needs condition and target");
      }
      if (condition->kind == EventKind::conditional || target->kind == EventKind::conditional) {
        throw Error(ErrorKind::invalid_params, "conditional events cannot be nested");
      }
      condition->validate();
      target->validate();
      break;
  }
}

std::int64_t EventSpec::horizon(std::int64_t n) const {
  switch (kind) {
    case EventKind::value_gt: return std::max(n, index);
    case EventKind::conditional: return std::max(condition->horizon(n), target->horizon(n));
    default: return n;
  }
}

ProbabilityEstimate estimate_event_probability(const SequenceFamily& family, const EventSpec& event,
                                               std::int64_t n, std::int64_t samples,
                                               std::uint64_t seed, unsigned threads) {
  if (samples < 1000) {
    throw Error(ErrorKind::insufficient_replications, "event estimates need >= 1000 samples");
  }
  if (n < 1) throw Error(ErrorKind::invalid_params, "n must be >= 1");
  event.validate();
  const double mean_sum = needs_mean(event) ? family.require_moments().mean_sum_at(n) : 0.0;
  const std::int64_t horizon = event.horizon(n);
  const bool conditional = event.kind == EventKind::conditional;

  const auto counts = replicate_sums(
      family, horizon, samples, seed, threads, 2, [&](const std::vector<double>& x, std::span<double> acc) {
        double s = 0.0;
        for (std::int64_t k = 0; k < n; ++k) s += x[static_cast<std::size_t>(k)];
        if (conditional) {
          if (event_holds(*event.condition, x, n, s, mean_sum)) {
            acc[1] += 1.0;
            if (event_holds(*event.target, x, n, s, mean_sum)) acc[0] += 1.0;
          }
        } else {
          acc[1] += 1.0;
          if (event_holds(event, x, n, s, mean_sum)) acc[0] += 1.0;
        }
      });

  ProbabilityEstimate p;
  p.hits = static_cast<std::int64_t>(counts[0]);
  p.trials = static_cast<std::int64_t>(counts[1]);
  if (p.trials == 0) {
    throw Error(ErrorKind::empty_condition, "no sample satisfied the conditioning event");
  }
  p.p_hat = static_cast<double>(p.hits) / static_cast<double>(p.trials);
  // For the ratio estimator the delta-method variance reduces to the
  // binomial one with the conditioning count as the trial number.
  p.std_error = bernoulli_stderr(p.p_hat, p.trials);
  p.ci95 = wilson_interval(p.hits, p.trials);
  return p;
}

double DyadicProbability::value() const {
  return static_cast<double>(std::ldexp(static_cast<long double>(numerator), -static_cast<int>(exponent)));
}

DyadicProbability exact_step_deviation_dyadic(std::int64_t n) {
  if (n < 1) throw Error(ErrorKind::invalid_params, "n must be >= 1");
  if (n > 64) throw Error(ErrorKind::n_too_large, "exact_step_deviation supports n <= 64");
  using Count = DyadicProbability::Count;
  // Work in half units: Xt_k = +-k/2 becomes +-k, the event threshold n/2 becomes n.
  const std::int64_t reach = n * (n + 1) / 2;
  std::vector<Count> ways(static_cast<std::size_t>(2 * reach + 1), 0);
  ways[static_cast<std::size_t>(reach)] = 1;
  std::int64_t span = 0;
  for (std::int64_t k = 1; k <= n; ++k) {
    std::vector<Count> next(ways.size(), 0);
    for (std::int64_t v = -span; v <= span; ++v) {
      const Count w = ways[static_cast<std::size_t>(v + reach)];
      if (w == 0) continue;
      next[static_cast<std::size_t>(v + k + reach)] += w;
      next[static_cast<std::size_t>(v - k + reach)] += w;
    }
    ways.swap(next);
    span += k;
  }
  DyadicProbability p;
  p.exponent = static_cast<unsigned>(n);
  for (std::int64_t v = n; v <= reach; ++v) p.numerator += ways[static_cast<std::size_t>(v + reach)];
  return p;
}

double exact_step_deviation(std::int64_t n) { return exact_step_deviation_dyadic(n).value(); }

DependenceProbe dependence_probe(const SequenceFamily& family, std::int64_t i, std::int64_t j,
                                 const ProbeSpec& probe, std::int64_t samples, std::uint64_t seed,
                                 unsigned threads) {
  if (i < 1 || j < 1) throw Error(ErrorKind::invalid_params, "probe indices must be >= 1");
  if (i == j) throw Error(ErrorKind::invalid_params, "probe indices must differ");
  if (samples < 10'000) {
    throw Error(ErrorKind::insufficient_replications, "dependence_probe needs >= 10^4 samples");
  }
  if (probe.kind == ProbeKind::near_max && !(probe.epsilon > 0.0)) {
    throw Error(ErrorKind::invalid_params, "near_max epsilon must be positive");
  }
  const double level = probe.kind == ProbeKind::sign ? probe.threshold : probe.max - probe.epsilon;
  const auto ii = static_cast<std::size_t>(i - 1);
  const auto jj = static_cast<std::size_t>(j - 1);

  // Cells: both, only i, only j.
  const auto counts = replicate_sums(
      family, std::max(i, j), samples, seed, threads, 3, [&](const std::vector<double>& x, std::span<double> acc) {
        const bool a = x[ii] > level;
        const bool b = x[jj] > level;
        if (a && b) acc[0] += 1.0;
        else if (a) acc[1] += 1.0;
        else if (b) acc[2] += 1.0;
      });

  const double m = static_cast<double>(samples);
  const double p11 = counts[0] / m;
  const double p10 = counts[1] / m;
  const double p01 = counts[2] / m;
  DependenceProbe d;
  d.samples = samples;
  d.p_joint = p11;
  d.p_i = p11 + p10;
  d.p_j = p11 + p01;
  if (counts[0] + counts[1] == 0.0) {
    throw Error(ErrorKind::empty_condition, "event on X_i never occurred");
  }
  const double cond_trials = counts[0] + counts[1];
  d.p_cond = counts[0] / cond_trials;
  d.p_cond_stderr = std::sqrt(d.p_cond * (1.0 - d.p_cond) / cond_trials);
  d.independence_gap = p11 - d.p_i * d.p_j;
  // Delta method on the multinomial cell frequencies.
  const double g11 = 1.0 - d.p_i - d.p_j;
  const double g10 = -d.p_j;
  const double g01 = -d.p_i;
  const double first = g11 * p11 + g10 * p10 + g01 * p01;
  const double second = g11 * g11 * p11 + g10 * g10 * p10 + g01 * g01 * p01;
  d.gap_stderr = std::sqrt(std::max(0.0, second - first * first) / m);
  return d;
}

double analytic_sum_variance(const MomentProfile& profile, std::int64_t n) {
  if (profile.pairwise_uncorrelated && profile.variance) {
    CompensatedSum acc;
    for (std::int64_t k = 1; k <= n; ++k) acc.add(profile.variance(k));
    return acc.value();
  }
  if (profile.pair_cov) {
    CompensatedSum acc;
    for (std::int64_t a = 1; a <= n; ++a) {
      for (std::int64_t b = 1; b <= n; ++b) acc.add(profile.pair_cov(a, b));
    }
    return acc.value();
  }
  throw Error(ErrorKind::moments_unavailable, "no analytic covariance structure for V(S_n)");
}

ChebyshevCheck chebyshev_empirical(const SequenceFamily& family, std::int64_t n, double delta,
                                   std::int64_t samples, std::uint64_t seed, unsigned threads) {
  if (n < 1) throw Error(ErrorKind::invalid_params, "n must be >= 1");
  if (!(delta > 0.0)) throw Error(ErrorKind::invalid_params, "delta must be positive");
  if (samples < 100) {
    throw Error(ErrorKind::insufficient_replications, "chebyshev_empirical needs >= 100 samples");
  }
  const MomentProfile& profile = family.require_moments();
  const double mean_sum = profile.mean_sum_at(n);
  const double band = static_cast<double>(n) * delta;

  const auto sums = replicate(family, n, samples, seed, threads, 1,
                              [](const std::vector<double>& x, std::span<double> out) {
                                double s = 0.0;
                                for (double v : x) s += v;
                                out[0] = s;
                              });
  std::int64_t hits = 0;
  for (double s : sums) hits += std::abs(s - mean_sum) > band ? 1 : 0;

  ChebyshevCheck c;
  try {
    c.variance_sum = analytic_sum_variance(profile, n);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::moments_unavailable) throw;
    c.variance_analytic = false;
    c.variance_sum = sample_variance(sums);
  }
  c.p_hat = static_cast<double>(hits) / static_cast<double>(samples);
  c.std_error = bernoulli_stderr(c.p_hat, samples);
  c.bound = c.variance_sum / (band * band);
  c.holds_within_noise = c.p_hat <= c.bound + 4.0 * c.std_error;
  return c;
}

PositivePartProductMc gaussian_positive_product_mc(std::int64_t pairs, std::uint64_t seed,
                                                   unsigned threads) {
  if (pairs < 2) throw Error(ErrorKind::insufficient_replications, "need at least two pairs");
  constexpr std::int64_t kChunk = 1 << 16;
  const auto chunks = static_cast<std::size_t>((pairs + kChunk - 1) / kChunk);
  // Per chunk: sum and sum of squares of Z1+ Z2+ and of the gated product.
  std::vector<std::array<double, 4>> partial(chunks, {0.0, 0.0, 0.0, 0.0});
  parallel_for(chunks, threads, [&](std::size_t c) {
    const CounterStream stream(derive_key(seed, c));
    const std::int64_t begin = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t end = std::min(pairs, begin + kChunk);
    auto& acc = partial[c];
    for (std::int64_t k = begin; k < end; ++k) {
      const auto base = static_cast<std::uint64_t>(3 * (k - begin));
      const double z1 = stream.normal(base);
      const double z2 = stream.normal(base + 1);
      // normal(c) consumes uniform counters 2c and 2c + 1, so 2 base + 4 is free.
      const bool open = stream.bernoulli(2 * base + 4, 0.5);
      const double y = std::max(z1, 0.0) * std::max(z2, 0.0);
      const double g = open ? y : 0.0;
      acc[0] += y;
      acc[1] += y * y;
      acc[2] += g;
      acc[3] += g * g;
    }
  });
  std::array<CompensatedSum, 4> total;
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < 4; ++i) total[i].add(p[i]);
  }
  const double m = static_cast<double>(pairs);
  const auto finish = [m](double s, double s2, double& mean_out, double& stderr_out) {
    mean_out = s / m;
    const double var = std::max(0.0, (s2 - m * mean_out * mean_out) / (m - 1.0));
    stderr_out = std::sqrt(var / m);
  };
  PositivePartProductMc r;
  r.pairs = pairs;
  finish(total[0].value(), total[1].value(), r.product_z, r.product_z_stderr);
  finish(total[2].value(), total[3].value(), r.product_pos, r.product_pos_stderr);
  return r;
}

}  // namespace llnlab
