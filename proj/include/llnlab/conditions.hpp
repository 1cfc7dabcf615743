#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "llnlab/families.hpp"

namespace llnlab {

enum class NormalizerKind { linear, power, explicit_values };

/// Positive, non-decreasing normalizing sequence b_n (1-based).
class Normalizer {
 public:
  static Normalizer linear();
  /// b_n = n^exponent, exponent > 0.
  static Normalizer power(double exponent);
  /// User array b_1..b_N. Finite, so every use is limited to n <= N.
  static Normalizer explicit_values(std::vector<double> values);

  double operator()(std::int64_t n) const;

  NormalizerKind kind() const noexcept { return kind_; }
  double exponent() const noexcept { return exponent_; }
  const std::vector<double>& values() const noexcept { return values_; }
  bool horizon_limited() const noexcept { return kind_ == NormalizerKind::explicit_values; }
  /// Throws Error(invalid_params) unless b_1..b_horizon are defined.
  void require_horizon(std::int64_t horizon) const;
  std::string name() const;

 private:
  Normalizer() = default;

  NormalizerKind kind_ = NormalizerKind::linear;
  double exponent_ = 1.0;
  std::vector<double> values_;
};

enum class Verdict { converges_evidence, diverges_evidence, inconclusive };
std::string to_string(Verdict verdict);

/// Terms and partial sums of a condition series, with a finite-horizon verdict.
/// terms[i] is the (i+1)-th term.
struct SeriesReport {
  std::vector<double> terms;
  std::vector<double> partial_sums;
  Verdict verdict = Verdict::inconclusive;
  std::string verdict_basis;
  double head_statistic = 0.0;  ///< thresholds actually compared, see verdict_basis
  double tail_statistic = 0.0;
  double threshold = 0.0;
  std::int64_t horizon = 0;
};

inline constexpr double kSummabilityExponent = 1.1;
inline constexpr double kDivergenceFloor = 1e-6;

/// Summability verdict for a series of non-negative terms:
///  - converges_evidence iff terms[n] * n^1.1 never rises, over the last half
///    of the horizon, above the largest value it took on the first half;
///  - otherwise diverges_evidence iff min of terms over the last half exceeds
///    divergence_floor;
///  - otherwise inconclusive.
SeriesReport summability_report(std::vector<double> terms, double divergence_floor = kDivergenceFloor);

/// Boundedness verdict for a running sequence: converges_evidence (bounded)
/// iff the max over the last half is at most 10x the median of the first half.
SeriesReport boundedness_report(std::vector<double> terms);

/// Terms V X_n / b_n^2 for n = 1..horizon. horizon >= 10.
SeriesReport kolmogorov_series(const IndexFn& variance, const Normalizer& normalizer,
                               std::int64_t horizon, double divergence_floor = kDivergenceFloor);

/// Ratio V(S_n) / sum_{k<=n} V(X_k) on a grid of n.
struct RatioReport {
  std::vector<std::int64_t> n_grid;
  std::vector<double> ratios;
  std::vector<double> stderrs;
  std::vector<double> sum_variances;       ///< estimated V(S_n)
  std::vector<double> variance_sums;       ///< denominator
  bool analytic_denominator = false;
  double c_hat = 0.0;
  std::int64_t replications = 0;
};

inline constexpr std::int64_t kRatioBatches = 10;

/// V(S_n) is estimated across independent whole-trajectory replications.
/// Standard errors come from kRatioBatches contiguous replication batches.
/// replications >= 100.
RatioReport quasi_uncorrelation_ratio(const SequenceFamily& family,
                                      const std::vector<std::int64_t>& n_grid,
                                      std::int64_t replications, std::uint64_t seed,
                                      unsigned threads = 0);

struct MonteCarloFallback {
  std::int64_t replications = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct ScaledMeanSup {
  double a_hat = 0.0;
  std::int64_t argmax_n = 1;
  std::vector<double> series;  ///< E S_n / b_n, n = 1..horizon
  /// False when the running maximum is still increasing over the last half
  /// of the horizon, i.e. the supremum looks infinite.
  bool bounded_evidence = true;
  bool analytic = true;
};

ScaledMeanSup scaled_mean_sup(const SequenceFamily& family, const Normalizer& normalizer,
                              std::int64_t horizon,
                              const std::optional<MonteCarloFallback>& fallback = std::nullopt);

struct TailIntegral {
  double value = 0.0;             ///< int_0^t_max of the sup-tail
  double error_estimate = 0.0;
  /// Estimate of int_{t_max}^inf, +inf when that integral failed to converge.
  double truncation_bound = 0.0;
  bool converges = true;
};

/// Chandra-Goswami integral int_0^inf sup_n P(|X_n| > t) dt for a
/// caller-supplied sup-tail. Divergence is flagged when the remainder over
/// [t_max, inf) cannot be integrated within budget.
TailIntegral cg_tail_integral(const std::function<double(double)>& tail_sup, double t_max,
                              double tolerance);

struct SupTail {
  std::function<double(double)> fn;
  std::int64_t horizon = 0;  ///< sup taken over n <= horizon
};

/// t -> max_{n <= horizon} P(|X_n| > t) for a non-negative family with an
/// analytic tail.
SupTail sup_tail_over_horizon(const SequenceFamily& family, std::int64_t horizon);

/// terms[n] = (1/n) sum_{k<=n} E|X_k - E X_k|, with a boundedness verdict.
SeriesReport mean_abs_deviation_rate(const SequenceFamily& family, std::int64_t horizon,
                                     std::int64_t replications, std::uint64_t seed,
                                     unsigned threads = 0);

struct TruncationGapReport {
  std::vector<double> l1_gaps;                    ///< E(X_n - Y_n)
  std::vector<double> mismatch_prob_partial_sums; ///< sum_{k<=n} P(X_k > k)
  std::vector<double> cesaro_gap;                 ///< (E S_n - E T_n) / n
  bool closed_form = false;
};

/// Y_n = X_n 1{X_n <= n}. Closed form when the family has an analytic tail,
/// Monte Carlo otherwise. The family must be non-negative.
TruncationGapReport truncation_gap_report(const SequenceFamily& family, std::int64_t horizon,
                                          std::int64_t replications, std::uint64_t seed,
                                          unsigned threads = 0);

struct BaselBound {
  double tail_value = 0.0;  ///< sum_{j>=k} 1/j^2
  double bound = 0.0;       ///< (1/k) pi^2/6
  bool holds = false;
};

BaselBound basel_tail_bound(std::int64_t k);
/// basel_tail_bound(k) for k = 1..k_max in one pass.
std::vector<BaselBound> basel_tail_bounds(std::int64_t k_max);

}  // namespace llnlab
