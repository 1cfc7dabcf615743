#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace llnlab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Key of child stream `stream` under `parent`. Pure function, so any worker
/// can rebuild the key of replication r without coordination.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t stream) noexcept {
  return mix64(mix64(parent) ^ mix64(stream + 0x2545f4914f6cdd1dULL));
}

/// Seed of replication `replication` under a master seed.
constexpr std::uint64_t replication_seed(std::uint64_t master_seed,
                                         std::uint64_t replication) noexcept {
  return derive_key(master_seed ^ 0x6c6c6e6c6162ULL, replication);
}

/// Counter-based random stream: draw number c is a pure function of (key, c).
/// Trajectories of different horizons therefore agree on their shared prefix.
class CounterStream {
 public:
  constexpr explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ + counter * 0xd1342543de82ef95ULL);
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lower, double upper) const noexcept {
    return lower + (upper - lower) * uniform(counter);
  }

  /// Standard normal by Box-Muller on counters 2c and 2c+1.
  double normal(std::uint64_t counter) const noexcept {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(std::uint64_t counter, double rate) const noexcept {
    return -std::log(uniform(counter)) / rate;
  }

  bool bernoulli(std::uint64_t counter, double p) const noexcept { return uniform(counter) < p; }

 private:
  std::uint64_t key_;
};

}  // namespace llnlab
