#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "llnlab/error.hpp"
#include "llnlab/families.hpp"
#include "llnlab/rng.hpp"
#include "llnlab/stats.hpp"

using namespace llnlab;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<FamilyDescriptor> catalogue() {
  return {
      FamilyDescriptor::cosine(),
      FamilyDescriptor::gated_gaussian(),
      FamilyDescriptor::step(),
      FamilyDescriptor::exponential(2.0),
      FamilyDescriptor::uniform(-1.0, 3.0),
      FamilyDescriptor::bernoulli_scaled(0.3, 5.0),
      FamilyDescriptor::constant(1.5),
      FamilyDescriptor::cosine().then(Transform::affine(1.0, 1.0)),
      FamilyDescriptor::cosine().then({TransformKind::positive_part}),
      FamilyDescriptor::gated_gaussian().then({TransformKind::positive_part}),
      FamilyDescriptor::step().then({TransformKind::center}),
      FamilyDescriptor::uniform(-1.0, 3.0).then({TransformKind::essinf_shift}),
      FamilyDescriptor::exponential(1.0).then({TransformKind::truncate}),
  };
}

}  // namespace

TEST_CASE("sampling is a pure function of descriptor, seed and horizon") {
  for (const FamilyDescriptor& d : catalogue()) {
    const SequenceFamily f = make_family(d);
    const Trajectory a = f.sample(200, 42);
    const Trajectory b = f.sample(200, 42);
    const Trajectory c = f.sample(50, 42);
    CHECK(a.values == b.values);
    // Shorter horizons see the same prefix.
    CHECK(std::equal(c.values.begin(), c.values.end(), a.values.begin()));
    std::vector<double> out;
    f.sample_values(200, 42, out);
    CHECK(out == a.values);
  }
}

TEST_CASE("prefix sums are running sums") {
  const Trajectory t = make_family(FamilyDescriptor::gated_gaussian()).sample(100, 3);
  CHECK(t.s(0) == 0.0);
  double s = 0.0;
  for (std::int64_t n = 1; n <= 100; ++n) {
    s += t.x(n);
    CHECK(t.s(n) == doctest::Approx(s));
  }
}

TEST_CASE("cosine values share a single latent") {
  SampleOptions o;
  o.force_latent_x = 0.125;
  const Trajectory t = make_family(FamilyDescriptor::cosine()).sample(8, 1, o);
  for (std::int64_t n = 1; n <= 8; ++n) CHECK(t.x(n) == doctest::Approx(std::cos(2.0 * kPi * n * 0.125)));
  CHECK(cosine_value(4, 0.125) == doctest::Approx(-1.0));
  CHECK(cosine_value(8, 0.125) == doctest::Approx(1.0));
}

TEST_CASE("gated Gaussian is all zero when the gate is closed") {
  SampleOptions o;
  o.force_latent_w = 0;
  const Trajectory t = make_family(FamilyDescriptor::gated_gaussian()).sample(50, 9, o);
  for (double x : t.values) CHECK(x == 0.0);
}

TEST_CASE("step values are 0 or n") {
  const Trajectory t = make_family(FamilyDescriptor::step()).sample(500, 11);
  for (std::int64_t n = 1; n <= 500; ++n) CHECK((t.x(n) == 0.0 || t.x(n) == static_cast<double>(n)));
}

TEST_CASE("property: Monte Carlo moments agree with the analytic profile") {
  const int reps = 100000;
  for (const FamilyDescriptor& d : catalogue()) {
    const SequenceFamily f = make_family(d);
    REQUIRE(f.moments().has_value());
    const MomentProfile& m = f.require_moments();
    std::vector<std::vector<double>> xs(3, std::vector<double>(reps));
    std::vector<double> values;
    for (int r = 0; r < reps; ++r) {
      f.sample_values(20, replication_seed(17, static_cast<std::uint64_t>(r)), values);
      xs[0][static_cast<std::size_t>(r)] = values[0];
      xs[1][static_cast<std::size_t>(r)] = values[4];
      xs[2][static_cast<std::size_t>(r)] = values[19];
    }
    const std::int64_t ns[] = {1, 5, 20};
    for (int i = 0; i < 3; ++i) {
      const std::int64_t n = ns[i];
      const std::vector<double>& x = xs[static_cast<std::size_t>(i)];
      INFO(d.display_name() << " n=" << n);
      const double mu = mean(x);
      CHECK(std::abs(mu - m.mean(n)) <= 4.0 * std::sqrt(m.variance(n) / reps) + 1e-12);
      // Standard error of the sample variance from the sample fourth central moment.
      double m4 = 0.0;
      for (double v : x) m4 += std::pow(v - mu, 4);
      m4 /= reps;
      const double var = sample_variance(x);
      const double se_var = std::sqrt(std::max(m4 - var * var, 0.0) / reps);
      CHECK(std::abs(var - m.variance(n)) <= 4.0 * se_var + 1e-12);
      if (m.tail) {
        const double t = m.mean(n);
        std::int64_t above = 0;
        for (double v : x) above += v > t ? 1 : 0;
        const double p = m.tail(n, t);
        CHECK(std::abs(static_cast<double>(above) / reps - p) <= 4.0 * std::sqrt(p * (1 - p) / reps) + 1e-12);
      }
    }
  }
}

TEST_CASE("property: positive part minus negative part is the identity pathwise") {
  for (const FamilyDescriptor& d : catalogue()) {
    const SequenceFamily base = make_family(d);
    const SequenceFamily pos = make_family(d.then({TransformKind::positive_part}));
    const SequenceFamily neg = make_family(d.then({TransformKind::negative_part}));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Trajectory x = base.sample(64, seed);
      const Trajectory p = pos.sample(64, seed);
      const Trajectory q = neg.sample(64, seed);
      for (std::int64_t n = 1; n <= 64; ++n) {
        CHECK(p.x(n) >= 0.0);
        CHECK(q.x(n) >= 0.0);
        CHECK(p.x(n) - q.x(n) == x.x(n));
      }
    }
  }
}

TEST_CASE("property: prefix-sum identity on every catalogue family") {
  for (const FamilyDescriptor& d : catalogue()) {
    const Trajectory t = make_family(d).sample(300, 8);
    double s = 0.0;
    for (std::int64_t n = 1; n <= 300; ++n) {
      s += t.x(n);
      CHECK(t.s(n) == s);
    }
  }
}

TEST_CASE("positive part of the gated Gaussian has the closed-form moments") {
  const SequenceFamily f = make_family(FamilyDescriptor::gated_gaussian().then({TransformKind::positive_part}));
  const MomentProfile& m = f.require_moments();
  CHECK(m.mean(1) == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0 * kPi))));
  CHECK(m.variance(1) == doctest::Approx(0.25 - 1.0 / (8.0 * kPi)));
  CHECK(m.pair_cov(1, 2) == doctest::Approx(1.0 / (8.0 * kPi)));
  CHECK_FALSE(m.pairwise_uncorrelated);
  CHECK(m.nonnegative());
}

TEST_CASE("step profile") {
  const MomentProfile& m = make_family(FamilyDescriptor::step()).require_moments();
  CHECK(m.mean(10) == 5.0);
  CHECK(m.variance(10) == 25.0);
  CHECK(m.mean_sum_at(10) == 27.5);
  CHECK(m.pairwise_uncorrelated);
  const auto path = m.mean_path(4);
  CHECK(path == std::vector<double>{0.5, 1.5, 3.0, 5.0});
  const MomentRecord r = analytic_moment(make_family(FamilyDescriptor::step()), 4);
  CHECK(r.mean_sum == 5.0);
}

TEST_CASE("affine transform is scale * x + shift") {
  const FamilyDescriptor d = FamilyDescriptor::cosine().then(Transform::affine(2.0, 1.0));
  const Trajectory base = make_family(FamilyDescriptor::cosine()).sample(20, 5);
  const Trajectory t = make_family(d).sample(20, 5);
  for (std::int64_t n = 1; n <= 20; ++n) CHECK(t.x(n) == doctest::Approx(2.0 * base.x(n) + 1.0));
  const MomentProfile& m = make_family(d).require_moments();
  CHECK(m.mean(3) == doctest::Approx(1.0));
  CHECK(m.variance(3) == doctest::Approx(2.0));
}

TEST_CASE("truncated exponential profile") {
  const MomentProfile& m =
      make_family(FamilyDescriptor::exponential(1.0).then({TransformKind::truncate})).require_moments();
  // E X 1{X <= n} = 1 - (n + 1) e^{-n}
  for (int n = 1; n <= 5; ++n) CHECK(m.mean(n) == doctest::Approx(1.0 - (n + 1) * std::exp(-n)));
}

TEST_CASE("descriptor validation") {
  CHECK_THROWS_AS(make_family(FamilyDescriptor::exponential(-1.0)), Error);
  CHECK_THROWS_AS(make_family(FamilyDescriptor::uniform(2.0, 1.0)), Error);
  CHECK_THROWS_AS(make_family(FamilyDescriptor::bernoulli_scaled(1.5, 1.0)), Error);
  FamilyDescriptor deep = FamilyDescriptor::cosine();
  for (std::size_t i = 0; i <= kMaxTransformDepth; ++i) deep = deep.then(Transform::affine(1.0, 0.0));
  CHECK_THROWS_AS(make_family(deep), Error);
  try {
    make_family(FamilyDescriptor::gated_gaussian().then({TransformKind::essinf_shift}));
    FAIL("expected moments_unavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::moments_unavailable);
  }
  try {
    make_family(FamilyDescriptor::cosine()).sample(0, 1);
    FAIL("expected invalid_params");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_params);
  }
  SampleOptions small;
  small.max_horizon = 10;
  try {
    make_family(FamilyDescriptor::cosine()).sample(11, 1, small);
    FAIL("expected horizon_overflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::horizon_overflow);
  }
}

TEST_CASE("names") {
  CHECK(to_string(FamilyKind::gated_gaussian) == "gated_gaussian");
  CHECK(FamilyDescriptor::step().kind() == FamilyKind::step);
  CHECK(FamilyDescriptor::step().then({TransformKind::center}).kind() == FamilyKind::transformed);
}
