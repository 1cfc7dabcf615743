#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "llnlab/conditions.hpp"
#include "llnlab/families.hpp"

namespace llnlab {

enum class Sign { plus, minus };
std::string to_string(Sign sign);

/// Smallest and largest index of a non-empty cell T_{level,s}.
struct Cell {
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;
};

/// The (alpha, epsilon) subsequence apparatus over n = 1..horizon.
///
/// m(n) = floor(log_alpha n) and s(n) is the band of E S_n / b_n:
/// epsilon s(n) <= E S_n / b_n < epsilon (s(n) + 1). Cell (level, s) collects
/// the indices k <= horizon with m(k) = level and s(k) = s. Empty cells fall
/// back to floor(alpha^level). Cells at the top level are cut off at the
/// horizon.
struct SubsequenceIndex {
  double alpha = 2.0;
  double epsilon = 0.5;
  double a = 0.0;  ///< sup of E S_n / b_n (supplied, or the max over the horizon)
  std::int64_t l = 0;  ///< floor(A / epsilon)
  std::int64_t horizon = 0;
  int max_level = 0;  ///< ceil(log_alpha horizon)
  bool linear_normalizer = true;
  std::vector<int> m;                 ///< m[n - 1] = m(n)
  std::vector<std::int64_t> s;        ///< s[n - 1] = s(n)
  std::vector<double> mean_path;      ///< E S_n
  std::vector<double> scaled_mean;    ///< E S_n / b_n
  std::map<std::pair<int, std::int64_t>, Cell> cells;

  int m_of(std::int64_t n) const { return m.at(static_cast<std::size_t>(n - 1)); }
  std::int64_t s_of(std::int64_t n) const { return s.at(static_cast<std::size_t>(n - 1)); }
  double mean_sum(std::int64_t n) const { return mean_path.at(static_cast<std::size_t>(n - 1)); }

  /// k(level, s)^+ and k(level, s)^-, with the floor(alpha^level) fallback.
  std::int64_t k_plus(int level, std::int64_t s_value) const;
  std::int64_t k_minus(int level, std::int64_t s_value) const;
  std::int64_t k(Sign sign, int level, std::int64_t s_value) const {
    return sign == Sign::plus ? k_plus(level, s_value) : k_minus(level, s_value);
  }
  bool cell_nonempty(int level, std::int64_t s_value) const {
    return cells.contains({level, s_value});
  }
  /// Largest level whose index range [alpha^level, alpha^(level+1)) lies
  /// entirely within 1..horizon; -1 if none.
  int last_complete_level() const;
};

/// floor(alpha^level) in double, the empty-cell fallback.
std::int64_t floor_power(double alpha, int level);
/// floor(log_alpha n), corrected so that alpha^m <= n < alpha^(m+1) in double.
int floor_log(double alpha, std::int64_t n);

/// Throws Error(sup_exceeded) when some E S_n / b_n lies at or above
/// epsilon (L + 1), Error(nonfinite_mean) on non-finite means and
/// Error(invalid_params) on negative ones.
SubsequenceIndex build_index(const IndexFn& mean_path, double alpha, double epsilon,
                             std::int64_t horizon, const Normalizer& normalizer = Normalizer::linear(),
                             std::optional<double> a = std::nullopt);

struct InvariantCheck {
  std::int64_t checked = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Every SubsequenceIndex invariant, plus |E S_k / b_k - E S_n / b_n| <= epsilon
/// at k = k(m(n), s(n))^+-.
InvariantCheck check_index_invariants(const SubsequenceIndex& index);

struct KappaRecord {
  std::int64_t j = 0;
  double kappa_plus = 0.0;
  double kappa_minus = 0.0;
  double kappa = 0.0;        ///< max of the two
  double finite_part = 0.0;  ///< of the larger one
  double tail_part = 0.0;
  double bound = 0.0;        ///< 4 alpha^4 / ((alpha^2 - 1) j^2)
  bool holds = false;
};

/// kappa_j = sum over levels with k(level, s) >= j of 1 / k(level, s)^2.
/// Levels up to last_complete_level() are summed exactly; the remaining levels
/// are bounded by 4 alpha^(-2 level) (from floor(x) >= x / 2), summed as a
/// geometric series from the first level that can reach j.
std::vector<KappaRecord> kappa_report(const SubsequenceIndex& index, std::int64_t s, std::int64_t j_max);

/// Terms c sum_{j <= k} V X_j / k^2 with k = k(level, s), one per level
/// 0..max_level, and the verdict of summability_report.
SeriesReport subsequence_variance_series(const SubsequenceIndex& index, const IndexFn& variance,
                                         Sign sign, std::int64_t s, double c = 1.0);

struct ChebyshevLevel {
  int level = 0;
  Sign sign = Sign::plus;
  std::int64_t k = 0;
  double p_hat = 0.0;
  double std_error = 0.0;
  double bound = 0.0;  ///< V(S_k) / (k delta)^2
  bool variance_analytic = true;
  bool holds = false;  ///< p_hat <= bound + 4 stderr
};

struct ChebyshevReport {
  std::vector<ChebyshevLevel> levels;
  std::vector<double> partial_sum_of_bounds;
  double delta = 0.0;
  std::int64_t replications = 0;
  bool all_hold() const;
};

/// P(|S_k - E S_k| > k delta) at k = k(level, s)^+- for each level, against the
/// Chebyshev bound. replications >= 100.
ChebyshevReport chebyshev_report(const SequenceFamily& family, const SubsequenceIndex& index,
                                 std::int64_t s, double delta, std::int64_t replications,
                                 std::uint64_t seed, unsigned threads = 0);

struct SandwichRecord {
  std::int64_t n = 0;
  double lower = 0.0;
  double mid_lo = 0.0;
  double mid = 0.0;
  double mid_hi = 0.0;
  double upper = 0.0;
  bool violated = false;
};

struct SandwichViolation {
  std::int64_t n = 0;
  int which = 0;  ///< 1..4, the position of the broken inequality in the chain
  double residual = 0.0;
};

inline constexpr double kSandwichTolerance = 1e-12;

struct SandwichReport {
  std::vector<SandwichRecord> records;
  std::vector<SandwichViolation> violations;
  double max_residual = 0.0;  ///< largest left-minus-right over all four inequalities
  std::string note;
};

/// The five-term inequality chain at every n <= index.horizon, with
/// k+- = k(m(n), s(n))+- and A in place of the bound the chain is stated with.
/// Requires an index built with the linear normalizer.
SandwichReport sandwich_check(const Trajectory& trajectory, const SubsequenceIndex& index);

struct OuterSlack {
  double upper = 0.0;  ///< (alpha - 1) A + epsilon
  double lower = 0.0;  ///< epsilon + (1 - 1/alpha) A
};

OuterSlack outer_slack(double alpha, double epsilon, double a);

}  // namespace llnlab
