#include <doctest.h>

#include <cmath>
#include <vector>

#include "llnlab/error.hpp"
#include "llnlab/families.hpp"
#include "llnlab/proofkit.hpp"
#include "llnlab/rng.hpp"

using namespace llnlab;

namespace {

IndexFn path_of(const SequenceFamily& f) {
  return [&f](std::int64_t n) { return f.require_moments().mean_sum_at(n); };
}

const SequenceFamily& shifted_cosine() {
  static const SequenceFamily f = make_family(FamilyDescriptor::cosine().then(Transform::affine(1.0, 1.0)));
  return f;
}

}  // namespace

TEST_CASE("floor_log and floor_power") {
  CHECK(floor_log(2.0, 1) == 0);
  CHECK(floor_log(2.0, 8) == 3);
  CHECK(floor_log(2.0, 7) == 2);
  CHECK(floor_log(10.0, 1000) == 3);
  CHECK(floor_log(1.5, 2) == 1);
  CHECK(floor_power(2.0, 10) == 1024);
  CHECK(floor_power(1.5, 3) == 3);
}

TEST_CASE("property: alpha^m <= n < alpha^(m+1)") {
  const CounterStream s(5);
  for (std::uint64_t c = 0; c < 2000; ++c) {
    const double alpha = 1.01 + 9.0 * s.uniform(2 * c);
    const auto n = static_cast<std::int64_t>(1 + s.bits(2 * c + 1) % 1000000);
    const int m = floor_log(alpha, n);
    CHECK(std::pow(alpha, m) <= static_cast<double>(n));
    CHECK(static_cast<double>(n) < std::pow(alpha, m + 1));
  }
}

TEST_CASE("index on the shifted cosine family") {
  const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), 2.0, 0.5, 1000);
  CHECK(idx.a == doctest::Approx(1.0));
  CHECK(idx.l == 2);
  CHECK(idx.max_level == 10);
  CHECK(idx.m_of(1) == 0);
  CHECK(idx.m_of(1000) == 9);
  for (std::int64_t n = 1; n <= 1000; ++n) CHECK(idx.s_of(n) == 2);
  CHECK(idx.k_minus(3, 2) == 8);
  CHECK(idx.k_plus(3, 2) == 15);
  CHECK(idx.k_plus(9, 2) == 1000);  // cut at the horizon
  CHECK_FALSE(idx.cell_nonempty(3, 0));
  CHECK(idx.k_plus(3, 0) == 8);  // fallback floor(alpha^level)
  CHECK(idx.last_complete_level() == 8);
  const InvariantCheck ok = check_index_invariants(idx);
  CHECK(ok.ok());
  CHECK(ok.checked > 0);
}

TEST_CASE("property: index invariants over the acceptance grid") {
  static const SequenceFamily exponential = make_family(FamilyDescriptor::exponential(1.0));
  for (const SequenceFamily* family : {&shifted_cosine(), &exponential})
  for (double alpha : {1.5, 2.0, 4.0}) {
    for (double eps : {0.1, 0.5}) {
      const SubsequenceIndex idx = build_index(path_of(*family), alpha, eps, 20000);
      const InvariantCheck c = check_index_invariants(idx);
      INFO("alpha=" << alpha << " eps=" << eps << (c.ok() ? "" : c.failures.front()));
      CHECK(c.ok());
      // Test-side re-check of k- <= n <= k+ and the epsilon band.
      for (std::int64_t n = 1; n <= idx.horizon; n += 37) {
        const int m = idx.m_of(n);
        const std::int64_t s = idx.s_of(n);
        const std::int64_t kp = idx.k_plus(m, s);
        const std::int64_t km = idx.k_minus(m, s);
        CHECK(km <= n);
        CHECK(n <= kp);
        const double v = idx.mean_sum(n) / static_cast<double>(n);
        CHECK(std::abs(idx.mean_sum(kp) / static_cast<double>(kp) - v) <= eps + 1e-12);
        CHECK(std::abs(idx.mean_sum(km) / static_cast<double>(km) - v) <= eps + 1e-12);
      }
    }
  }
}

TEST_CASE("index bands on a varying mean path") {
  // E S_n / n sweeps [0, 1.5) so several s-bands are populated.
  const IndexFn path = [](std::int64_t n) {
    const double x = static_cast<double>(n);
    return x * 1.5 * (1.0 - 1.0 / std::sqrt(x));
  };
  const SubsequenceIndex idx = build_index(path, 2.0, 0.25, 5000);
  CHECK(check_index_invariants(idx).ok());
  for (std::int64_t n = 1; n <= 5000; ++n) {
    const double v = idx.scaled_mean[static_cast<std::size_t>(n - 1)];
    const std::int64_t s = idx.s_of(n);
    CHECK(0.25 * static_cast<double>(s) <= v + 1e-15);
    CHECK(v < 0.25 * static_cast<double>(s + 1));
  }
}

TEST_CASE("index errors") {
  const IndexFn path = path_of(shifted_cosine());
  CHECK_THROWS_AS(build_index(path, 1.0, 0.5, 100), Error);
  CHECK_THROWS_AS(build_index(path, 2.0, 0.0, 100), Error);
  try {
    build_index(path, 2.0, 0.5, 100, Normalizer::linear(), 0.4);
    FAIL("expected sup_exceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::sup_exceeded);
  }
  try {
    build_index([](std::int64_t n) { return -static_cast<double>(n); }, 2.0, 0.5, 100);
    FAIL("expected invalid_params");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_params);
  }
  try {
    build_index([](std::int64_t) { return std::nan(""); }, 2.0, 0.5, 100);
    FAIL("expected nonfinite_mean");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::nonfinite_mean);
  }
}

TEST_CASE("kappa bound holds for j <= 1000") {
  for (double alpha : {1.5, 2.0, 4.0}) {
    const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), alpha, 0.5, 100000);
    for (std::int64_t s = 0; s <= idx.l; ++s) {
      const auto records = kappa_report(idx, s, 1000);
      REQUIRE(records.size() == 1000);
      for (const KappaRecord& r : records) {
        CHECK(r.holds);
        CHECK(r.kappa <= r.bound);
        CHECK(r.bound == doctest::Approx(4.0 * std::pow(alpha, 4) / ((alpha * alpha - 1.0) * r.j * r.j)));
      }
    }
  }
}

TEST_CASE("kappa finite part by direct summation") {
  const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), 2.0, 0.5, 1 << 12);
  const auto records = kappa_report(idx, 2, 10);
  // Levels 0..last complete: k+ = 2^(m+1) - 1 (m < 12), summed when k >= j.
  for (const KappaRecord& r : records) {
    double oracle = 0.0;
    for (int m = 0; m <= idx.last_complete_level(); ++m) {
      const double k = std::pow(2.0, m + 1) - 1.0;
      if (k >= static_cast<double>(r.j)) oracle += 1.0 / (k * k);
    }
    CHECK(r.kappa_plus >= oracle - 1e-15);
  }
}

TEST_CASE("subsequence variance series converges for bounded variances") {
  const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), 2.0, 0.5, 100000);
  const SeriesReport r =
      subsequence_variance_series(idx, shifted_cosine().require_moments().variance, Sign::plus, 2);
  CHECK(r.terms.size() == static_cast<std::size_t>(idx.max_level + 1));
  CHECK(r.verdict == Verdict::converges_evidence);
  // sum V / k^2 with V = 1/2 and k = 2^(m+1) - 1 at the complete levels.
  CHECK(r.terms[3] == doctest::Approx(0.5 * 15.0 / (15.0 * 15.0)));
}

TEST_CASE("chebyshev report at subsequence indices") {
  const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), 2.0, 0.5, 2000);
  const ChebyshevReport r = chebyshev_report(shifted_cosine(), idx, 2, 0.05, 1000, 7, 2);
  CHECK(r.all_hold());
  CHECK(r.levels.size() == 2 * static_cast<std::size_t>(idx.max_level + 1));
  for (std::size_t i = 1; i < r.partial_sum_of_bounds.size(); ++i) {
    CHECK(r.partial_sum_of_bounds[i] >= r.partial_sum_of_bounds[i - 1]);
  }
  const ChebyshevReport again = chebyshev_report(shifted_cosine(), idx, 2, 0.05, 1000, 7, 5);
  for (std::size_t i = 0; i < r.levels.size(); ++i) CHECK(r.levels[i].p_hat == again.levels[i].p_hat);
}

TEST_CASE("sandwich chain has no violations on shifted cosine paths") {
  for (double alpha : {1.5, 2.0, 4.0}) {
    for (double eps : {0.1, 0.5}) {
      const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), alpha, eps, 3000);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const SandwichReport r = sandwich_check(shifted_cosine().sample(3000, seed), idx);
        CHECK(r.violations.empty());
        CHECK(r.records.size() == 3000);
        CHECK(r.max_residual <= kSandwichTolerance);
        for (const SandwichRecord& x : r.records) {
          CHECK(x.lower <= x.mid_lo + 1e-12);
          CHECK(x.mid_lo <= x.mid + 1e-12);
          CHECK(x.mid <= x.mid_hi + 1e-12);
          CHECK(x.mid_hi <= x.upper + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("sandwich errors") {
  const SubsequenceIndex idx = build_index(path_of(shifted_cosine()), 2.0, 0.5, 100);
  try {
    sandwich_check(shifted_cosine().sample(50, 1), idx);
    FAIL("expected horizon_mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::horizon_mismatch);
  }
  try {
    sandwich_check(make_family(FamilyDescriptor::cosine()).sample(100, 1), idx);
    FAIL("expected negativity_detected");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::negativity_detected);
  }
}

TEST_CASE("outer slack") {
  const OuterSlack s = outer_slack(2.0, 0.5, 1.0);
  CHECK(s.upper == doctest::Approx(1.5));
  CHECK(s.lower == doctest::Approx(1.0));
  double prev = 1e300;
  for (int m = 1; m <= 5; ++m) {
    const OuterSlack x = outer_slack(1.0 + 1.0 / m, 1.0 / m, 1.0);
    CHECK(x.upper < prev);
    prev = x.upper;
  }
  CHECK(to_string(Sign::minus) == "minus");
}
