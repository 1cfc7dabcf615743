#include "llnlab/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "llnlab/error.hpp"
#include "llnlab/stats.hpp"

namespace llnlab {
namespace {

// Kronrod abscissae on [0, 1]; odd positions (1, 3, 5, 7) are the Gauss nodes.
constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;

  bool operator<(const Panel& other) const { return error < other.error; }
};

double checked(const Integrand& f, double x) {
  const double y = f(x);
  if (!std::isfinite(y)) {
    throw Error(ErrorKind::nonfinite_integrand,
                "integrand is " + std::to_string(y) + " at x = " + std::to_string(x));
  }
  return y;
}

Panel gauss_kronrod(const Integrand& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = checked(f, center);
  double kronrod = kKronrodWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  double abs_kronrod = std::abs(kronrod);
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = half * kNodes[i];
    const double f1 = checked(f, center - dx);
    const double f2 = checked(f, center + dx);
    kronrod += kKronrodWeights[i] * (f1 + f2);
    abs_kronrod += kKronrodWeights[i] * (std::abs(f1) + std::abs(f2));
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (f1 + f2);
  }
  const double value = kronrod * half;
  const double roundoff = 50.0 * std::numeric_limits<double>::epsilon() * abs_kronrod * std::abs(half);
  const double error = std::max(std::abs((kronrod - gauss) * half), roundoff);
  return {a, b, value, error};
}

constexpr std::int64_t kEvaluationsPerPanel = 15;

QuadratureResult adaptive_finite(const Integrand& f, double a, double b, double tolerance,
                                 double rel_tolerance, std::int64_t max_evaluations) {
  std::priority_queue<Panel> heap;
  std::vector<Panel> settled;
  QuadratureResult result;

  Panel first = gauss_kronrod(f, a, b);
  result.evaluations = kEvaluationsPerPanel;
  double total_error = first.error;
  double total_value = first.value;
  heap.push(first);
  const auto target = [&] { return std::max(tolerance, rel_tolerance * std::abs(total_value)); };

  while (total_error > target() && !heap.empty() &&
         result.evaluations + 2 * kEvaluationsPerPanel <= max_evaluations) {
    Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const double scale = std::max(std::abs(worst.a), std::abs(worst.b));
    if (!(mid > worst.a && mid < worst.b) ||
        worst.b - worst.a <= 1024.0 * std::numeric_limits<double>::epsilon() * scale) {
      // Too narrow for double precision: outer nodes would round onto the endpoints.
      settled.push_back(worst);
      continue;
    }
    Panel left = gauss_kronrod(f, worst.a, mid);
    Panel right = gauss_kronrod(f, mid, worst.b);
    result.evaluations += 2 * kEvaluationsPerPanel;
    total_error += left.error + right.error - worst.error;
    total_value += left.value + right.value - worst.value;
    heap.push(left);
    heap.push(right);
  }

  CompensatedSum value;
  CompensatedSum error;
  for (const Panel& p : settled) {
    value.add(p.value);
    error.add(p.error);
  }
  while (!heap.empty()) {
    value.add(heap.top().value);
    error.add(heap.top().error);
    heap.pop();
  }
  result.value = value.value();
  result.abs_error_estimate = error.value();
  // A panel that ran out of double resolution before the tolerance was met
  // may hide an endpoint singularity its rule cannot see.
  result.converged = settled.empty() && result.abs_error_estimate <=
                                            std::max(tolerance, rel_tolerance * std::abs(result.value));
  return result;
}

QuadratureResult combine(const QuadratureResult& x, const QuadratureResult& y, double tolerance) {
  QuadratureResult r;
  r.value = x.value + y.value;
  r.abs_error_estimate = x.abs_error_estimate + y.abs_error_estimate;
  r.evaluations = x.evaluations + y.evaluations;
  r.converged = r.abs_error_estimate <= tolerance;
  return r;
}

}  // namespace

QuadratureResult integrate_adaptive(const Integrand& f, double a, double b, double tolerance,
                                    std::int64_t max_evaluations) {
  return integrate_relative(f, a, b, tolerance, 0.0, max_evaluations);
}

QuadratureResult integrate_relative(const Integrand& f, double a, double b, double tolerance,
                                    double rel_tolerance, std::int64_t max_evaluations) {
  if (!(tolerance > 0.0) || rel_tolerance < 0.0) {
    throw Error(ErrorKind::invalid_params, "tolerance must be positive");
  }
  if (std::isnan(a) || std::isnan(b) || !(a < b)) {
    if (a == b) return {0.0, 0.0, 0, true};
    throw Error(ErrorKind::invalid_params, "integration bounds must satisfy a < b");
  }
  const bool lower_inf = std::isinf(a);
  const bool upper_inf = std::isinf(b);

  if (lower_inf && upper_inf) {
    auto left = integrate_relative(f, a, 0.0, 0.5 * tolerance, rel_tolerance, max_evaluations / 2);
    auto right = integrate_relative(f, 0.0, b, 0.5 * tolerance, rel_tolerance, max_evaluations / 2);
    QuadratureResult r = combine(left, right, tolerance);
    r.converged = left.converged && right.converged;
    return r;
  }
  if (upper_inf) {
    const Integrand mapped = [&f, a](double u) {
      const double w = 1.0 - u;
      const double t = a + u / w;
      const double y = f(t);
      return y == 0.0 ? 0.0 : y / (w * w);
    };
    return adaptive_finite(mapped, 0.0, 1.0, tolerance, rel_tolerance, max_evaluations);
  }
  if (lower_inf) {
    const Integrand mapped = [&f, b](double u) {
      const double w = 1.0 - u;
      const double t = b - u / w;
      const double y = f(t);
      return y == 0.0 ? 0.0 : y / (w * w);
    };
    return adaptive_finite(mapped, 0.0, 1.0, tolerance, rel_tolerance, max_evaluations);
  }
  return adaptive_finite(f, a, b, tolerance, rel_tolerance, max_evaluations);
}

QuadratureResult integrate_1d(const Integrand& f, double a, double b, double tolerance,
                              std::int64_t max_evaluations) {
  QuadratureResult r = integrate_adaptive(f, a, b, tolerance, max_evaluations);
  if (!r.converged) {
    throw Error(ErrorKind::tolerance_not_met,
                "error estimate " + std::to_string(r.abs_error_estimate) + " above tolerance " +
                    std::to_string(tolerance) + " after " + std::to_string(r.evaluations) +
                    " evaluations");
  }
  return r;
}

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

double normal_upper_tail(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

CosineMoment cosine_moment(std::int64_t i, std::int64_t j) {
  if (i < 0 || j < 0) throw Error(ErrorKind::invalid_params, "cosine_moment needs i, j >= 0");
  const double wi = 2.0 * std::numbers::pi * static_cast<double>(i);
  const double wj = 2.0 * std::numbers::pi * static_cast<double>(j);
  const Integrand f = [wi, wj](double x) { return 0.5 * std::cos(wi * x) * std::cos(wj * x); };
  CosineMoment m;
  m.quadrature = integrate_1d(f, -1.0, 1.0, 1e-13).value;

  // cos a cos b = (cos(a - b) + cos(a + b)) / 2, and the mean of cos(2 pi k X)
  // under the uniform law on [-1, 1] is 1 if k = 0 and 0 otherwise.
  const auto mean_cos = [](std::int64_t k) { return k == 0 ? 1.0 : 0.0; };
  m.analytic = 0.5 * (mean_cos(i - j) + mean_cos(i + j));
  return m;
}

GaussianPosPartMoments gaussian_pospart_moments(double tolerance) {
  GaussianPosPartMoments m;
  const double inf = std::numeric_limits<double>::infinity();

  m.mean_pos = 0.5 * integrate_1d(normal_upper_tail, 0.0, inf, tolerance).value;

  const double first_moment_z =
      integrate_1d([](double x) { return x * normal_pdf(x); }, 0.0, inf, tolerance).value;
  m.triple_integral = first_moment_z * first_moment_z;
  m.product_pos = 0.5 * m.triple_integral;

  const double second_moment_z =
      integrate_1d([](double x) { return x * x * normal_pdf(x); }, 0.0, inf, tolerance).value;
  m.second_moment_pos = 0.5 * second_moment_z;
  m.cov_pos = m.product_pos - m.mean_pos * m.mean_pos;
  m.var_pos = m.second_moment_pos - m.mean_pos * m.mean_pos;
  return m;
}

QuadratureResult pospart_triple_integral_nested(double tolerance) {
  const double inf = std::numeric_limits<double>::infinity();
  const double inner_tol = tolerance * 1e-3;
  const double middle_tol = tolerance * 1e-2;
  std::int64_t evaluations = 0;

  const Integrand over_x = [&](double t) {
    const Integrand over_y_given_x = [&, t](double x) {
      const double lower = t / x;
      if (!std::isfinite(lower)) return 0.0;
      const auto inner = integrate_1d(normal_pdf, lower, inf, inner_tol);
      evaluations += inner.evaluations;
      return normal_pdf(x) * inner.value;
    };
    const auto middle = integrate_1d(over_y_given_x, 0.0, inf, middle_tol);
    evaluations += middle.evaluations;
    return middle.value;
  };
  QuadratureResult outer = integrate_1d(over_x, 0.0, inf, tolerance);
  outer.evaluations += evaluations;
  return outer;
}

}  // namespace llnlab
