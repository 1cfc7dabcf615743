#pragma once

#include <cstdint>
#include <functional>

namespace llnlab {

using Integrand = std::function<double(double)>;

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  std::int64_t evaluations = 0;
  bool converged = false;
};

inline constexpr std::int64_t kDefaultEvaluationBudget = 2'000'000;

/// Globally adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
///
/// Either endpoint may be infinite. A semi-infinite range [a, inf) is mapped
/// onto [0, 1) by t = a + u / (1 - u), dt = du / (1 - u)^2, and (-inf, b]
/// symmetrically; a doubly infinite range is split at 0. The Kronrod nodes
/// are interior, so u = 1 is never evaluated; the largest node used,
/// 1 - 0.0085 * width, keeps 1 - u well above the double underflow range
/// even after ~1000 bisections of the last subinterval.
///
/// The error estimate of each panel is |K15 - G7| (floored at a few ulps of
/// the panel's absolute integral). That is pessimistic for smooth
/// integrands; callers get a bound they can rely on rather than a sharp one.
///
/// Throws Error(tolerance_not_met) when the budget runs out before the
/// summed error estimate reaches `tolerance`, and Error(nonfinite_integrand)
/// on NaN or infinite integrand values.
QuadratureResult integrate_1d(const Integrand& f, double a, double b, double tolerance,
                              std::int64_t max_evaluations = kDefaultEvaluationBudget);

/// Same as integrate_1d but reports failure to converge in the result instead
/// of throwing. Non-finite integrand values still throw.
QuadratureResult integrate_adaptive(const Integrand& f, double a, double b, double tolerance,
                                    std::int64_t max_evaluations = kDefaultEvaluationBudget);

/// Stops once the error estimate is below max(tolerance, rel_tolerance * |value|).
/// Does not throw on non-convergence.
QuadratureResult integrate_relative(const Integrand& f, double a, double b, double tolerance,
                                    double rel_tolerance,
                                    std::int64_t max_evaluations = kDefaultEvaluationBudget);

struct CosineMoment {
  double quadrature = 0.0;
  double analytic = 0.0;
};

/// E[cos(2 pi i X) cos(2 pi j X)] for X uniform on [-1, 1] (density 1/2),
/// by quadrature and by the product-to-sum identity.
CosineMoment cosine_moment(std::int64_t i, std::int64_t j);

/// Moments of the positive part of W * Z, W ~ Bernoulli(1/2), Z ~ N(0, 1).
struct GaussianPosPartMoments {
  double mean_pos = 0.0;         ///< E X1+ = (1/2) int_0^inf P(Z > t) dt
  double triple_integral = 0.0;  ///< int_0^inf int_0^inf int_{t/x}^inf phi(x) phi(y) dy dx dt
  double product_pos = 0.0;      ///< E(X1+ X2+) = triple_integral / 2
  double second_moment_pos = 0.0;  ///< E((X1+)^2) = E((Z+)^2) / 2
  double cov_pos = 0.0;
  double var_pos = 0.0;
};

/// The triple integral is evaluated through its reduction to (E Z+)^2: moving
/// the t-integral innermost gives int int x y phi(x) phi(y) over the positive
/// quadrant. See pospart_triple_integral_nested for the unreduced form.
GaussianPosPartMoments gaussian_pospart_moments(double tolerance = 1e-12);

/// Direct three-level nested evaluation of the displayed triple integral.
/// Slow; kept as a cross-check of the reduction.
QuadratureResult pospart_triple_integral_nested(double tolerance = 1e-6);

/// Standard normal density and upper tail.
double normal_pdf(double x) noexcept;
double normal_upper_tail(double x) noexcept;

}  // namespace llnlab
