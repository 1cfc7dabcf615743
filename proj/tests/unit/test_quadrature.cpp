#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "llnlab/error.hpp"
#include "llnlab/quadrature.hpp"

using namespace llnlab;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

// Product-to-sum: cos a cos b = (cos(a - b) + cos(a + b)) / 2, and the mean of
// cos(2 pi k x) over [-1, 1] is 1 for k = 0 and 0 otherwise.
double cosine_oracle(int i, int j) {
  const auto avg = [](int k) { return k == 0 ? 1.0 : 0.0; };
  return 0.5 * (avg(i - j) + avg(i + j));
}
}  // namespace

TEST_CASE("closed-form suite") {
  const QuadratureResult e = integrate_1d([](double t) { return std::exp(-t); }, 0.0, kInf, 1e-10);
  CHECK(std::abs(e.value - 1.0) < 1e-8);
  CHECK(e.evaluations > 0);
  const QuadratureResult n = integrate_1d(normal_pdf, -kInf, kInf, 1e-10);
  CHECK(std::abs(n.value - 1.0) < 1e-8);
  const QuadratureResult z = integrate_1d([](double) { return 0.0; }, 0.0, 1.0, 1e-10);
  CHECK(z.value == 0.0);
  CHECK(z.abs_error_estimate >= 0.0);
}

TEST_CASE("error estimate is conservative on the closed-form suite") {
  struct Case {
    Integrand f;
    double a, b, exact;
  };
  const Case cases[] = {
      {[](double t) { return std::exp(-t); }, 0.0, kInf, 1.0},
      {normal_pdf, -kInf, kInf, 1.0},
      {[](double x) { return x * x; }, 0.0, 3.0, 9.0},
      {[](double x) { return std::sin(x); }, 0.0, kPi, 2.0},
      {[](double x) { return 1.0 / (1.0 + x * x); }, -kInf, kInf, kPi},
      {[](double x) { return std::sqrt(x); }, 0.0, 1.0, 2.0 / 3.0},
      {normal_upper_tail, 0.0, kInf, 1.0 / std::sqrt(2.0 * kPi)},
  };
  for (const Case& c : cases) {
    const QuadratureResult r = integrate_1d(c.f, c.a, c.b, 1e-9);
    CHECK(r.converged);
    CHECK(std::abs(r.value - c.exact) <= r.abs_error_estimate + 1e-15);
    CHECK(r.abs_error_estimate <= 1e-9);
  }
}

TEST_CASE("integrator errors") {
  CHECK_THROWS_AS(integrate_1d([](double) { return std::nan(""); }, 0.0, 1.0, 1e-8), Error);
  try {
    integrate_1d([](double x) { return 1.0 / x; }, 0.0, 1.0, 1e-10, 2000);
    FAIL("expected tolerance_not_met");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::tolerance_not_met);
  }
  const QuadratureResult r = integrate_adaptive([](double x) { return 1.0 / x; }, 0.0, 1.0, 1e-10, 2000);
  CHECK_FALSE(r.converged);
}

TEST_CASE("normal helpers") {
  CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * kPi)));
  CHECK(normal_upper_tail(0.0) == doctest::Approx(0.5));
  CHECK(normal_upper_tail(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
}

TEST_CASE("cosine moments match the product-to-sum identity for 0 <= i, j <= 20") {
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const CosineMoment m = cosine_moment(i, j);
      CHECK(std::abs(m.quadrature - cosine_oracle(i, j)) < 1e-10);
      CHECK(std::abs(m.analytic - cosine_oracle(i, j)) < 1e-12);
    }
  }
  CHECK(std::abs(cosine_moment(1, 2).quadrature) < 1e-10);
  CHECK(std::abs(cosine_moment(3, 3).quadrature - 0.5) < 1e-10);
  CHECK(std::abs(cosine_moment(0, 0).quadrature - 1.0) < 1e-10);
}

TEST_CASE("positive-part moments of the gated Gaussian") {
  const GaussianPosPartMoments m = gaussian_pospart_moments();
  const double mean_exact = 1.0 / (2.0 * std::sqrt(2.0 * kPi));
  CHECK(std::abs(m.mean_pos - 0.199471) < 1e-4);
  CHECK(std::abs(m.mean_pos - mean_exact) < 1e-10);
  CHECK(std::abs(m.triple_integral - 0.15915) < 5e-3);
  CHECK(std::abs(m.triple_integral - 1.0 / (2.0 * kPi)) < 1e-10);
  CHECK(m.product_pos == m.triple_integral / 2.0);
  CHECK(m.second_moment_pos == doctest::Approx(0.25));
  CHECK(m.cov_pos > 0.0);
  CHECK(std::abs(m.cov_pos - 1.0 / (8.0 * kPi)) < 1e-10);
  CHECK(std::abs(m.var_pos - (0.25 - 1.0 / (8.0 * kPi))) < 1e-10);
  // Analytic ratio V(S_n) / n V(X_1) at n = 100: 1 + 99 Cov / V.
  const double ratio = 1.0 + 99.0 * m.cov_pos / m.var_pos;
  CHECK(ratio == doctest::Approx(19.74).epsilon(1e-3));
}

TEST_CASE("nested triple integral agrees with the reduction") {
  const QuadratureResult q = pospart_triple_integral_nested(1e-6);
  CHECK(std::abs(q.value - 1.0 / (2.0 * kPi)) < 1e-5);
}

TEST_CASE("a log-divergent tail is not reported as converged") {
  // The mapped integrand of 1/(1+t) on [10, inf) behaves like 1/(1-u) at u = 1.
  const QuadratureResult r = integrate_adaptive([](double t) { return 1.0 / (1.0 + t); }, 10.0, kInf, 1e-8, 200000);
  CHECK_FALSE(r.converged);
  const QuadratureResult ok =
      integrate_adaptive([](double t) { return 1.0 / ((1.0 + t) * (1.0 + t)); }, 10.0, kInf, 1e-10, 200000);
  CHECK(ok.converged);
  CHECK(ok.value == doctest::Approx(1.0 / 11.0).epsilon(1e-9));
}
