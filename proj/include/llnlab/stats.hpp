#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace llnlab {

/// Neumaier compensated sum. Adding the same values in the same order always
/// gives the same result, which is what merge determinism relies on.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double sum(std::span<const double> xs) noexcept;
double mean(std::span<const double> xs) noexcept;
/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
double sample_variance(std::span<const double> xs) noexcept;
double median(std::vector<double> xs);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an ascending range.
double quantile_sorted(std::span<const double> sorted, double q);

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Wilson score interval for a Bernoulli proportion.
Interval wilson_interval(std::int64_t successes, std::int64_t trials, double z = kZ95);

/// Standard error of a Bernoulli proportion estimate, sqrt(p(1-p)/n).
double bernoulli_stderr(double p_hat, std::int64_t trials);

}  // namespace llnlab
