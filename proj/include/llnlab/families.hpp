#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace llnlab {

enum class FamilyKind { cosine, gated_gaussian, step, iid, transformed };

/// Base law of an i.i.d. family.
enum class IidBase { exponential, uniform, bernoulli_scaled, constant };

struct IidParams {
  IidBase base = IidBase::exponential;
  double rate = 1.0;         // exponential
  double lower = 0.0;        // uniform
  double upper = 1.0;        // uniform
  double probability = 0.5;  // bernoulli_scaled: X = scale * Bernoulli(probability)
  double scale = 1.0;        // bernoulli_scaled
  double value = 0.0;        // constant

  bool operator==(const IidParams&) const = default;
};

enum class TransformKind { truncate, positive_part, negative_part, center, essinf_shift, affine };

/// Pointwise map applied to X_n. Affine is x -> scale * x + shift.
struct Transform {
  TransformKind kind = TransformKind::truncate;
  double scale = 1.0;
  double shift = 0.0;

  static Transform affine(double scale, double shift) {
    return {TransformKind::affine, scale, shift};
  }
  bool operator==(const Transform&) const = default;
};

inline constexpr std::size_t kMaxTransformDepth = 8;

/// A named random-sequence model: one built-in base plus a chain of
/// pointwise transforms (at most kMaxTransformDepth).
struct FamilyDescriptor {
  FamilyKind base = FamilyKind::cosine;  ///< never FamilyKind::transformed
  IidParams iid;                         ///< used when base == iid
  std::vector<Transform> transforms;
  std::string label;

  /// FamilyKind::transformed whenever the chain is non-empty.
  FamilyKind kind() const noexcept {
    return transforms.empty() ? base : FamilyKind::transformed;
  }
  /// Throws Error(invalid_params) or Error(unknown_kind).
  void validate() const;
  FamilyDescriptor then(Transform t) const;
  std::string display_name() const;

  static FamilyDescriptor cosine();
  static FamilyDescriptor gated_gaussian();
  static FamilyDescriptor step();
  static FamilyDescriptor exponential(double rate);
  static FamilyDescriptor uniform(double lower, double upper);
  static FamilyDescriptor bernoulli_scaled(double probability, double scale);
  static FamilyDescriptor constant(double value);

  bool operator==(const FamilyDescriptor&) const = default;
};

std::string to_string(FamilyKind kind);
std::string to_string(IidBase base);
std::string to_string(TransformKind kind);

using IndexFn = std::function<double(std::int64_t)>;
using TailFn = std::function<double(std::int64_t, double)>;
using PairFn = std::function<double(std::int64_t, std::int64_t)>;

/// Analytic moments of X_n. Empty std::function members are unavailable.
struct MomentProfile {
  IndexFn mean;
  IndexFn variance;
  IndexFn mean_sum;  ///< closed-form E S_n; may be empty (see mean_sum_at)
  IndexFn essinf;    ///< may return -inf
  IndexFn esssup;    ///< may return +inf
  TailFn tail;       ///< P(X_n > t)
  PairFn pair_cov;   ///< Cov(X_i, X_j)
  bool pairwise_uncorrelated = false;
  /// A lower bound valid for every X_n, when one is known.
  std::optional<double> uniform_lower_bound;

  /// E S_n from the closed form when present, else by compensated summation
  /// of mean(1..n).
  double mean_sum_at(std::int64_t n) const;
  /// E S_1..E S_horizon.
  std::vector<double> mean_path(std::int64_t horizon) const;
  bool nonnegative() const noexcept { return uniform_lower_bound && *uniform_lower_bound >= 0.0; }
};

/// Latent draws shared by every index of a trajectory.
struct Latents {
  std::optional<double> x;  ///< cosine: X ~ U[-1, 1]
  std::optional<int> w;     ///< gated_gaussian: W in {0, 1}
};

struct SampleOptions {
  std::optional<double> force_latent_x;  ///< test hook
  std::optional<int> force_latent_w;     ///< test hook
  std::int64_t max_horizon = 100'000'000;
};

/// One sampled path X_1..X_N with prefix sums. Vectors are 0-based:
/// values[n - 1] holds X_n.
struct Trajectory {
  FamilyDescriptor descriptor;
  std::uint64_t seed = 0;
  std::vector<double> values;
  std::vector<double> prefix_sums;
  Latents latents;

  std::int64_t horizon() const noexcept { return static_cast<std::int64_t>(values.size()); }
  double x(std::int64_t n) const { return values.at(static_cast<std::size_t>(n - 1)); }
  /// S_n, with S_0 = 0.
  double s(std::int64_t n) const {
    return n == 0 ? 0.0 : prefix_sums.at(static_cast<std::size_t>(n - 1));
  }
};

class SequenceFamily {
 public:
  const FamilyDescriptor& descriptor() const noexcept { return descriptor_; }
  const std::optional<MomentProfile>& moments() const noexcept { return moments_; }
  /// Throws Error(moments_unavailable) when there is no analytic profile.
  const MomentProfile& require_moments() const;

  /// Pure function of (descriptor, seed, horizon).
  Trajectory sample(std::int64_t horizon, std::uint64_t seed, const SampleOptions& options = {}) const;

  /// Writes X_1..X_horizon into `out` (resized) and returns the latents.
  /// Same values as sample(); no prefix sums and no descriptor copy.
  Latents sample_values(std::int64_t horizon, std::uint64_t seed, std::vector<double>& out,
                        const SampleOptions& options = {}) const;

 private:
  friend SequenceFamily make_family(const FamilyDescriptor& descriptor);
  friend SequenceFamily transform_family(const SequenceFamily& family, const Transform& transform);

  struct Stage {
    Transform transform;
    IndexFn offset;  ///< subtracted by center / essinf_shift
  };

  FamilyDescriptor descriptor_;
  std::vector<Stage> stages_;
  std::optional<MomentProfile> moments_;
};

SequenceFamily make_family(const FamilyDescriptor& descriptor);

Trajectory sample_trajectory(const SequenceFamily& family, std::int64_t horizon, std::uint64_t seed,
                             const SampleOptions& options = {});

struct MomentRecord {
  double mean = 0.0;
  double variance = 0.0;
  double mean_sum = 0.0;
  double essinf = 0.0;
};

MomentRecord analytic_moment(const SequenceFamily& family, std::int64_t n);

/// Appends `transform` to the family. The moment profile is propagated when a
/// closed form exists and dropped otherwise.
SequenceFamily transform_family(const SequenceFamily& family, const Transform& transform);

/// cos(2 pi n x), the cosine family's value at index n given latent x.
double cosine_value(std::int64_t n, double x) noexcept;

}  // namespace llnlab
