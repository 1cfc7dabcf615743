#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "llnlab/error.hpp"
#include "llnlab/parallel.hpp"
#include "llnlab/rng.hpp"
#include "llnlab/stats.hpp"

using namespace llnlab;

TEST_CASE("counter stream draws are pure functions of key and counter") {
  const CounterStream a(derive_key(7, 3));
  const CounterStream b(derive_key(7, 3));
  for (std::uint64_t c = 0; c < 100; ++c) {
    CHECK(a.bits(c) == b.bits(c));
    const double u = a.uniform(c);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK(derive_key(7, 3) != derive_key(7, 4));
  CHECK(derive_key(7, 3) != derive_key(8, 3));
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
}

TEST_CASE("derived keys do not collide over a small grid") {
  std::set<std::uint64_t> keys;
  for (std::uint64_t p = 0; p < 64; ++p) {
    for (std::uint64_t s = 0; s < 64; ++s) keys.insert(derive_key(p, s));
  }
  CHECK(keys.size() == 64u * 64u);
}

TEST_CASE("uniform and normal draws have the right first two moments") {
  const CounterStream s(12345);
  const int n = 200000;
  std::vector<double> u(n), z(n);
  for (int i = 0; i < n; ++i) {
    u[i] = s.uniform(static_cast<std::uint64_t>(i));
    z[i] = s.normal(static_cast<std::uint64_t>(n + i));
  }
  // 5 standard errors
  CHECK(std::abs(mean(u) - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sample_variance(u) - 1.0 / 12.0) < 1e-3);
  CHECK(std::abs(mean(z)) < 5.0 / std::sqrt(n));
  CHECK(std::abs(sample_variance(z) - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("compensated sum recovers small terms lost by naive addition") {
  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == doctest::Approx(1000.0));
}

TEST_CASE("descriptive statistics") {
  const std::vector<double> xs = {4.0, 1.0, 3.0, 2.0};
  CHECK(sum(xs) == 10.0);
  CHECK(mean(xs) == 2.5);
  CHECK(sample_variance(xs) == doctest::Approx(5.0 / 3.0));
  CHECK(median(xs) == 2.5);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  const std::vector<double> sorted = {1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(quantile_sorted(sorted, 0.0) == 1.0);
  CHECK(quantile_sorted(sorted, 1.0) == 5.0);
  CHECK(quantile_sorted(sorted, 0.5) == 3.0);
  CHECK(quantile_sorted(sorted, 0.05) == doctest::Approx(1.2));
  CHECK(sample_variance(std::vector<double>{1.0}) == 0.0);
}

TEST_CASE("wilson interval") {
  // Closed form for 50/100 at z = 1.96.
  const Interval w = wilson_interval(50, 100);
  const double z = kZ95;
  const double half = z * std::sqrt(0.25 / 100 + z * z / (4.0 * 100 * 100)) / (1 + z * z / 100);
  CHECK(w.lower == doctest::Approx(0.5 - half));
  CHECK(w.upper == doctest::Approx(0.5 + half));
  const Interval zero = wilson_interval(0, 100);
  CHECK(zero.lower == doctest::Approx(0.0));
  CHECK(zero.upper > 0.0);
  CHECK(bernoulli_stderr(0.5, 100) == doctest::Approx(0.05));
}

TEST_CASE("property: wilson interval contains the point estimate") {
  const CounterStream s(99);
  for (std::uint64_t c = 0; c < 500; ++c) {
    const auto trials = static_cast<std::int64_t>(1 + s.bits(2 * c) % 5000);
    const auto hits = static_cast<std::int64_t>(s.bits(2 * c + 1) % static_cast<std::uint64_t>(trials + 1));
    const Interval w = wilson_interval(hits, trials);
    const double p = static_cast<double>(hits) / static_cast<double>(trials);
    CHECK(w.lower <= p + 1e-12);
    CHECK(w.upper >= p - 1e-12);
    CHECK(w.lower >= -1e-12);
    CHECK(w.upper <= 1.0 + 1e-12);
  }
}

TEST_CASE("parallel_for visits every index once for any worker count") {
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i].fetch_add(1); });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));
  }
  CHECK(resolve_threads(0) >= 1u);
  CHECK(resolve_threads(5) == 5u);
}

TEST_CASE("parallel_for rethrows the failure at the smallest index") {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 80) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "17");
  }
}

TEST_CASE("error kinds have stable names") {
  CHECK(to_string(ErrorKind::config_invalid) == "config-invalid");
  CHECK(to_string(ErrorKind::sup_exceeded) == "sup-exceeded");
  const Error e(ErrorKind::n_too_large, "x");
  CHECK(e.kind() == ErrorKind::n_too_large);
}
