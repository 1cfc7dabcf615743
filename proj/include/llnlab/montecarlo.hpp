#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "llnlab/conditions.hpp"
#include "llnlab/families.hpp"
#include "llnlab/stats.hpp"

namespace llnlab {

/// Replications are processed in fixed chunks of this size. Chunk results are
/// merged in chunk order, so nothing depends on the worker count.
inline constexpr std::int64_t kReplicationChunk = 256;

/// Maps the values X_1..X_N of one replication to `out`.
using ReplicationFeatures =
    std::function<void(const std::vector<double>& values, std::span<double> out)>;

/// Row-major replications x width matrix; row r is filled from the trajectory
/// seeded with replication_seed(seed, r). Rows start zeroed.
std::vector<double> replicate(const SequenceFamily& family, std::int64_t horizon,
                              std::int64_t replications, std::uint64_t seed, unsigned threads,
                              std::size_t width, const ReplicationFeatures& features);

/// Same replications, but `add` accumulates into one shared-width row; returns
/// the sum over all replications.
std::vector<double> replicate_sums(const SequenceFamily& family, std::int64_t horizon,
                                   std::int64_t replications, std::uint64_t seed, unsigned threads,
                                   std::size_t width, const ReplicationFeatures& add);

struct CheckpointStats {
  std::int64_t n = 0;
  double mean_dev = 0.0;  ///< mean of (S_n - E S_n) / b_n
  double stddev = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  double frac_within_tol = 0.0;
  double frac_zero_sum = 0.0;  ///< fraction of replications with S_n == 0 exactly
};

struct ExperimentResult {
  FamilyDescriptor descriptor;
  std::string normalizer;
  std::uint64_t master_seed = 0;
  std::int64_t replications = 0;
  double tolerance = 0.0;
  std::vector<std::int64_t> checkpoints;
  std::vector<CheckpointStats> per_checkpoint;
  double runtime_ms = 0.0;
};

/// One trajectory per replication up to the last checkpoint. E S_n comes from
/// the analytic profile. replications >= 30; checkpoints strictly ascending.
ExperimentResult run_lln_experiment(const SequenceFamily& family, const Normalizer& normalizer,
                                    const std::vector<std::int64_t>& checkpoints,
                                    std::int64_t replications, double tolerance,
                                    std::uint64_t master_seed, unsigned threads = 0);

enum class EventKind { centered_sum_geq, scaled_mean_outside, value_gt, conditional };
std::string to_string(EventKind kind);

struct EventSpec {
  EventKind kind = EventKind::centered_sum_geq;
  double threshold = 0.0;  ///< centered_sum_geq: multiple of n; value_gt: level
  double center = 0.0;     ///< scaled_mean_outside
  double delta = 0.0;      ///< scaled_mean_outside
  std::int64_t index = 1;  ///< value_gt
  std::shared_ptr<const EventSpec> condition;  ///< conditional
  std::shared_ptr<const EventSpec> target;     ///< conditional

  /// S_n - E S_n >= threshold * n.
  static EventSpec centered_sum_geq(double threshold);
  /// |S_n / n - center| > delta.
  static EventSpec scaled_mean_outside(double center, double delta);
  /// X_index > threshold.
  static EventSpec value_gt(std::int64_t index, double threshold);
  static EventSpec conditional(EventSpec condition, EventSpec target);

  void validate() const;
  /// Largest index the event looks at for a given n.
  std::int64_t horizon(std::int64_t n) const;
};

struct ProbabilityEstimate {
  double p_hat = 0.0;
  double std_error = 0.0;
  Interval ci95;
  std::int64_t hits = 0;
  std::int64_t trials = 0;  ///< samples, or conditioning hits for the conditional kind
};

/// Bernoulli estimate with a Wilson 95% interval. The conditional kind is the
/// ratio of joint hits to conditioning hits. samples >= 1000.
ProbabilityEstimate estimate_event_probability(const SequenceFamily& family, const EventSpec& event,
                                               std::int64_t n, std::int64_t samples,
                                               std::uint64_t seed, unsigned threads = 0);

/// P(sum_{k<=n} Xt_k >= n/2) for independent Xt_k = +-k/2, as numerator / 2^n.
struct DyadicProbability {
  __extension__ typedef unsigned __int128 Count;
  Count numerator = 0;
  unsigned exponent = 0;
  double value() const;
};

DyadicProbability exact_step_deviation_dyadic(std::int64_t n);
/// 1 <= n <= 64.
double exact_step_deviation(std::int64_t n);

enum class ProbeKind { sign, near_max };

struct ProbeSpec {
  ProbeKind kind = ProbeKind::sign;
  double threshold = 0.0;  ///< sign: event X > threshold
  double epsilon = 0.05;   ///< near_max: event X > max - epsilon
  double max = 1.0;
};

struct DependenceProbe {
  double p_joint = 0.0;
  double p_i = 0.0;
  double p_j = 0.0;
  double p_cond = 0.0;  ///< P(event j | event i)
  double p_cond_stderr = 0.0;
  double independence_gap = 0.0;  ///< p_joint - p_i p_j
  double gap_stderr = 0.0;
  std::int64_t samples = 0;
};

/// i != j, samples >= 10^4.
DependenceProbe dependence_probe(const SequenceFamily& family, std::int64_t i, std::int64_t j,
                                 const ProbeSpec& probe, std::int64_t samples, std::uint64_t seed,
                                 unsigned threads = 0);

struct ChebyshevCheck {
  double p_hat = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  double variance_sum = 0.0;  ///< V(S_n) used in the bound
  bool variance_analytic = true;
  bool holds_within_noise = false;  ///< p_hat <= bound + 4 stderr
};

/// P(|S_n - E S_n| > n delta) against V(S_n) / (n delta)^2.
ChebyshevCheck chebyshev_empirical(const SequenceFamily& family, std::int64_t n, double delta,
                                   std::int64_t samples, std::uint64_t seed, unsigned threads = 0);

/// V(S_n) from the profile: Bienaymé when pairwise uncorrelated, else the
/// double sum of pair covariances. Throws moments_unavailable otherwise.
double analytic_sum_variance(const MomentProfile& profile, std::int64_t n);

struct PositivePartProductMc {
  double product_z = 0.0;  ///< E(Z1+ Z2+) for independent standard normals
  double product_z_stderr = 0.0;
  double product_pos = 0.0;  ///< E(X1+ X2+) for the gated family
  double product_pos_stderr = 0.0;
  std::int64_t pairs = 0;
};

PositivePartProductMc gaussian_positive_product_mc(std::int64_t pairs, std::uint64_t seed,
                                                   unsigned threads = 0);

}  // namespace llnlab
