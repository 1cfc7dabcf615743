#include "llnlab/families.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "llnlab/error.hpp"
#include "llnlab/quadrature.hpp"
#include "llnlab/rng.hpp"
#include "llnlab/stats.hpp"

namespace llnlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double as_real(std::int64_t n) { return static_cast<double>(n); }

bool finite(double x) { return std::isfinite(x); }

MomentProfile cosine_profile() {
  MomentProfile p;
  p.mean = [](std::int64_t) { return 0.0; };
  p.variance = [](std::int64_t) { return 0.5; };
  p.mean_sum = [](std::int64_t) { return 0.0; };
  p.essinf = [](std::int64_t) { return -1.0; };
  p.esssup = [](std::int64_t) { return 1.0; };
  // n X mod 1 is uniform, so P(cos(2 pi n X) > t) = arccos(t) / pi on [-1, 1].
  p.tail = [](std::int64_t, double t) {
    if (t < -1.0) return 1.0;
    if (t >= 1.0) return 0.0;
    return std::acos(t) / std::numbers::pi;
  };
  p.pair_cov = [](std::int64_t i, std::int64_t j) { return i == j ? 0.5 : 0.0; };
  p.pairwise_uncorrelated = true;
  p.uniform_lower_bound = -1.0;
  return p;
}

MomentProfile gated_gaussian_profile() {
  MomentProfile p;
  p.mean = [](std::int64_t) { return 0.0; };
  p.variance = [](std::int64_t) { return 0.5; };
  p.mean_sum = [](std::int64_t) { return 0.0; };
  p.essinf = [](std::int64_t) { return -kInf; };
  p.esssup = [](std::int64_t) { return kInf; };
  p.tail = [](std::int64_t, double t) {
    const double gaussian_part = 0.5 * normal_upper_tail(t);
    return t < 0.0 ? 0.5 + gaussian_part : gaussian_part;
  };
  p.pair_cov = [](std::int64_t i, std::int64_t j) { return i == j ? 0.5 : 0.0; };
  p.pairwise_uncorrelated = true;
  return p;
}

MomentProfile step_profile() {
  MomentProfile p;
  p.mean = [](std::int64_t n) { return as_real(n) / 2.0; };
  p.variance = [](std::int64_t n) { return as_real(n) * as_real(n) / 4.0; };
  p.mean_sum = [](std::int64_t n) { return as_real(n) * as_real(n + 1) / 4.0; };
  p.essinf = [](std::int64_t) { return 0.0; };
  p.esssup = [](std::int64_t n) { return as_real(n); };
  p.tail = [](std::int64_t n, double t) {
    if (t < 0.0) return 1.0;
    return t < as_real(n) ? 0.5 : 0.0;
  };
  p.pair_cov = [](std::int64_t i, std::int64_t j) {
    return i == j ? as_real(i) * as_real(i) / 4.0 : 0.0;
  };
  p.pairwise_uncorrelated = true;
  p.uniform_lower_bound = 0.0;
  return p;
}

/// Profile of an i.i.d. family with the given per-index moments.
MomentProfile iid_profile(double mean, double variance, double essinf, double esssup,
                          std::function<double(double)> tail) {
  MomentProfile p;
  p.mean = [mean](std::int64_t) { return mean; };
  p.variance = [variance](std::int64_t) { return variance; };
  p.mean_sum = [mean](std::int64_t n) { return mean * as_real(n); };
  p.essinf = [essinf](std::int64_t) { return essinf; };
  p.esssup = [esssup](std::int64_t) { return esssup; };
  p.tail = [tail = std::move(tail)](std::int64_t, double t) { return tail(t); };
  p.pair_cov = [variance](std::int64_t i, std::int64_t j) { return i == j ? variance : 0.0; };
  p.pairwise_uncorrelated = true;
  if (finite(essinf)) p.uniform_lower_bound = essinf;
  return p;
}

MomentProfile iid_base_profile(const IidParams& q) {
  switch (q.base) {
    case IidBase::exponential: {
      const double rate = q.rate;
      return iid_profile(1.0 / rate, 1.0 / (rate * rate), 0.0, kInf,
                         [rate](double t) { return t < 0.0 ? 1.0 : std::exp(-rate * t); });
    }
    case IidBase::uniform: {
      const double a = q.lower;
      const double b = q.upper;
      return iid_profile(0.5 * (a + b), (b - a) * (b - a) / 12.0, a, b, [a, b](double t) {
        if (t < a) return 1.0;
        if (t >= b) return 0.0;
        return (b - t) / (b - a);
      });
    }
    case IidBase::bernoulli_scaled: {
      const double p = q.probability;
      const double c = q.scale;
      const double lo = p == 1.0 ? c : (p == 0.0 ? 0.0 : std::min(0.0, c));
      const double hi = p == 1.0 ? c : (p == 0.0 ? 0.0 : std::max(0.0, c));
      return iid_profile(p * c, c * c * p * (1.0 - p), lo, hi, [p, c](double t) {
        return (0.0 > t ? 1.0 - p : 0.0) + (c > t ? p : 0.0);
      });
    }
    case IidBase::constant: {
      const double c = q.value;
      return iid_profile(c, 0.0, c, c, [c](double t) { return c > t ? 1.0 : 0.0; });
    }
  }
  throw Error(ErrorKind::unknown_kind, "unknown i.i.d. base");
}

MomentProfile zero_profile() {
  return iid_profile(0.0, 0.0, 0.0, 0.0, [](double t) { return t < 0.0 ? 1.0 : 0.0; });
}

/// Positive part of W Z: E = E(Z+)/2, E(X+^2) = 1/4, Cov(X_i+, X_j+) = 1/(8 pi).
MomentProfile gated_gaussian_part_profile() {
  const double mean = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::pi));
  const double cov = 1.0 / (8.0 * std::numbers::pi);
  const double variance = 0.25 - mean * mean;
  MomentProfile p;
  p.mean = [mean](std::int64_t) { return mean; };
  p.variance = [variance](std::int64_t) { return variance; };
  p.mean_sum = [mean](std::int64_t n) { return mean * as_real(n); };
  p.essinf = [](std::int64_t) { return 0.0; };
  p.esssup = [](std::int64_t) { return kInf; };
  p.tail = [](std::int64_t, double t) { return t < 0.0 ? 1.0 : 0.5 * normal_upper_tail(t); };
  p.pair_cov = [variance, cov](std::int64_t i, std::int64_t j) { return i == j ? variance : cov; };
  p.pairwise_uncorrelated = false;
  p.uniform_lower_bound = 0.0;
  return p;
}

/// Positive (equivalently negative) part of cos(2 pi n X): E = 1/pi, E(.^2) = 1/4.
MomentProfile cosine_part_profile() {
  const double mean = 1.0 / std::numbers::pi;
  const double variance = 0.25 - mean * mean;
  MomentProfile p;
  p.mean = [mean](std::int64_t) { return mean; };
  p.variance = [variance](std::int64_t) { return variance; };
  p.mean_sum = [mean](std::int64_t n) { return mean * as_real(n); };
  p.essinf = [](std::int64_t) { return 0.0; };
  p.esssup = [](std::int64_t) { return 1.0; };
  p.tail = [](std::int64_t, double t) {
    if (t < 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    return std::acos(t) / std::numbers::pi;
  };
  p.uniform_lower_bound = 0.0;
  return p;
}

/// Exponential(rate) truncated as X 1{X <= n}.
MomentProfile truncated_exponential_profile(double rate) {
  MomentProfile p;
  const auto first = [rate](std::int64_t n) {
    const double ln = rate * as_real(n);
    return (1.0 - std::exp(-ln) * (1.0 + ln)) / rate;
  };
  const auto second = [rate](std::int64_t n) {
    const double ln = rate * as_real(n);
    return (2.0 - std::exp(-ln) * (ln * ln + 2.0 * ln + 2.0)) / (rate * rate);
  };
  p.mean = first;
  p.variance = [first, second](std::int64_t n) {
    const double m = first(n);
    return std::max(0.0, second(n) - m * m);
  };
  p.essinf = [](std::int64_t) { return 0.0; };
  p.esssup = [](std::int64_t n) { return as_real(n); };
  p.tail = [rate](std::int64_t n, double t) {
    if (t < 0.0) return 1.0;
    if (t >= as_real(n)) return 0.0;
    return std::exp(-rate * t) - std::exp(-rate * as_real(n));
  };
  p.pair_cov = [variance = p.variance](std::int64_t i, std::int64_t j) {
    return i == j ? variance(i) : 0.0;
  };
  p.pairwise_uncorrelated = true;
  p.uniform_lower_bound = 0.0;
  return p;
}

MomentProfile affine_profile(const MomentProfile& src, double a, double b) {
  MomentProfile p;
  p.mean = [m = src.mean, a, b](std::int64_t n) { return a * m(n) + b; };
  p.variance = [v = src.variance, a](std::int64_t n) { return a * a * v(n); };
  if (src.mean_sum) {
    p.mean_sum = [ms = src.mean_sum, a, b](std::int64_t n) { return a * ms(n) + b * as_real(n); };
  }
  const auto image = [a, b](double x) { return a == 0.0 ? b : a * x + b; };
  if (a >= 0.0) {
    p.essinf = [f = src.essinf, image](std::int64_t n) { return image(f(n)); };
    p.esssup = [f = src.esssup, image](std::int64_t n) { return image(f(n)); };
  } else {
    p.essinf = [f = src.esssup, image](std::int64_t n) { return image(f(n)); };
    p.esssup = [f = src.essinf, image](std::int64_t n) { return image(f(n)); };
  }
  if (a > 0.0 && src.tail) {
    p.tail = [tail = src.tail, a, b](std::int64_t n, double t) { return tail(n, (t - b) / a); };
  } else if (a == 0.0) {
    p.tail = [b](std::int64_t, double t) { return b > t ? 1.0 : 0.0; };
  }
  if (src.pair_cov) {
    p.pair_cov = [c = src.pair_cov, a](std::int64_t i, std::int64_t j) { return a * a * c(i, j); };
  }
  p.pairwise_uncorrelated = src.pairwise_uncorrelated;
  if (a == 0.0) {
    p.uniform_lower_bound = b;
  } else if (a > 0.0 && src.uniform_lower_bound) {
    p.uniform_lower_bound = a * *src.uniform_lower_bound + b;
  }
  return p;
}

/// X_n - offset(n) for a deterministic offset.
MomentProfile shifted_profile(const MomentProfile& src, IndexFn offset) {
  MomentProfile p;
  p.mean = [m = src.mean, offset](std::int64_t n) { return m(n) - offset(n); };
  p.variance = src.variance;
  p.essinf = [f = src.essinf, offset](std::int64_t n) { return f(n) - offset(n); };
  p.esssup = [f = src.esssup, offset](std::int64_t n) { return f(n) - offset(n); };
  if (src.tail) {
    p.tail = [tail = src.tail, offset](std::int64_t n, double t) { return tail(n, t + offset(n)); };
  }
  p.pair_cov = src.pair_cov;
  p.pairwise_uncorrelated = src.pairwise_uncorrelated;
  return p;
}

double apply_stage(const Transform& t, const IndexFn& offset, std::int64_t n, double x) {
  switch (t.kind) {
    case TransformKind::truncate: return x <= as_real(n) ? x : 0.0;
    case TransformKind::positive_part: return x > 0.0 ? x : 0.0;
    case TransformKind::negative_part: return x < 0.0 ? -x : 0.0;
    case TransformKind::center:
    case TransformKind::essinf_shift: return x - offset(n);
    case TransformKind::affine: return t.scale * x + t.shift;
  }
  return x;
}

std::string format_real(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::cosine: return "cosine";
    case FamilyKind::gated_gaussian: return "gated_gaussian";
    case FamilyKind::step: return "step";
    case FamilyKind::iid: return "iid";
    case FamilyKind::transformed: return "transformed";
  }
  return "unknown";
}

std::string to_string(IidBase base) {
  switch (base) {
    case IidBase::exponential: return "exponential";
    case IidBase::uniform: return "uniform";
    case IidBase::bernoulli_scaled: return "bernoulli_scaled";
    case IidBase::constant: return "constant";
  }
  return "unknown";
}

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::truncate: return "truncate";
    case TransformKind::positive_part: return "positive_part";
    case TransformKind::negative_part: return "negative_part";
    case TransformKind::center: return "center";
    case TransformKind::essinf_shift: return "essinf_shift";
    case TransformKind::affine: return "affine";
  }
  return "unknown";
}

void FamilyDescriptor::validate() const {
  if (base == FamilyKind::transformed) {
    throw Error(ErrorKind::unknown_kind, "a family base cannot itself be 'transformed'");
  }
  if (base == FamilyKind::iid) {
    const IidParams& q = iid;
    switch (q.base) {
      case IidBase::exponential:
        if (!(q.rate > 0.0) || !finite(q.rate)) {
          throw Error(ErrorKind::invalid_params, "exponential rate must be positive and finite");
        }
        break;
      case IidBase::uniform:
        if (!finite(q.lower) || !finite(q.upper) || !(q.lower < q.upper)) {
          throw Error(ErrorKind::invalid_params, "uniform range needs finite a < b");
        }
        break;
      case IidBase::bernoulli_scaled:
        if (!(q.probability >= 0.0 && q.probability <= 1.0) || !finite(q.scale)) {
          throw Error(ErrorKind::invalid_params, "bernoulli_scaled needs p in [0, 1] and finite scale");
        }
        break;
      case IidBase::constant:
        if (!finite(q.value)) throw Error(ErrorKind::invalid_params, "constant must be finite");
        break;
    }
  }
  if (transforms.size() > kMaxTransformDepth) {
    throw Error(ErrorKind::invalid_params, "transform chain deeper than " +
                                               std::to_string(kMaxTransformDepth));
  }
  for (const Transform& t : transforms) {
    if (t.kind == TransformKind::affine && (!finite(t.scale) || !finite(t.shift))) {
      throw Error(ErrorKind::invalid_params, "affine coefficients must be finite");
    }
  }
}

FamilyDescriptor FamilyDescriptor::then(Transform t) const {
  FamilyDescriptor d = *this;
  d.transforms.push_back(t);
  return d;
}

std::string FamilyDescriptor::display_name() const {
  if (!label.empty()) return label;
  std::string name = to_string(base);
  if (base == FamilyKind::iid) {
    switch (iid.base) {
      case IidBase::exponential: name += ":exponential(" + format_real(iid.rate) + ")"; break;
      case IidBase::uniform:
        name += ":uniform(" + format_real(iid.lower) + "," + format_real(iid.upper) + ")";
        break;
      case IidBase::bernoulli_scaled:
        name += ":bernoulli_scaled(" + format_real(iid.probability) + "," + format_real(iid.scale) + ")";
        break;
      case IidBase::constant: name += ":constant(" + format_real(iid.value) + ")"; break;
    }
  }
  for (const Transform& t : transforms) {
    name += "|" + to_string(t.kind);
    if (t.kind == TransformKind::affine) {
      name += "(" + format_real(t.scale) + "," + format_real(t.shift) + ")";
    }
  }
  return name;
}

FamilyDescriptor FamilyDescriptor::cosine() { return {FamilyKind::cosine, {}, {}, "cosine"}; }
FamilyDescriptor FamilyDescriptor::gated_gaussian() {
  return {FamilyKind::gated_gaussian, {}, {}, "gated_gaussian"};
}
FamilyDescriptor FamilyDescriptor::step() { return {FamilyKind::step, {}, {}, "step"}; }

FamilyDescriptor FamilyDescriptor::exponential(double rate) {
  FamilyDescriptor d{FamilyKind::iid, {}, {}, "exponential"};
  d.iid.base = IidBase::exponential;
  d.iid.rate = rate;
  return d;
}

FamilyDescriptor FamilyDescriptor::uniform(double lower, double upper) {
  FamilyDescriptor d{FamilyKind::iid, {}, {}, "uniform"};
  d.iid.base = IidBase::uniform;
  d.iid.lower = lower;
  d.iid.upper = upper;
  return d;
}

FamilyDescriptor FamilyDescriptor::bernoulli_scaled(double probability, double scale) {
  FamilyDescriptor d{FamilyKind::iid, {}, {}, "bernoulli_scaled"};
  d.iid.base = IidBase::bernoulli_scaled;
  d.iid.probability = probability;
  d.iid.scale = scale;
  return d;
}

FamilyDescriptor FamilyDescriptor::constant(double value) {
  FamilyDescriptor d{FamilyKind::iid, {}, {}, "constant"};
  d.iid.base = IidBase::constant;
  d.iid.value = value;
  return d;
}

double MomentProfile::mean_sum_at(std::int64_t n) const {
  if (mean_sum) return mean_sum(n);
  CompensatedSum acc;
  for (std::int64_t k = 1; k <= n; ++k) acc.add(mean(k));
  return acc.value();
}

std::vector<double> MomentProfile::mean_path(std::int64_t horizon) const {
  std::vector<double> path(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)));
  if (mean_sum) {
    for (std::int64_t n = 1; n <= horizon; ++n) path[static_cast<std::size_t>(n - 1)] = mean_sum(n);
    return path;
  }
  CompensatedSum acc;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    acc.add(mean(n));
    path[static_cast<std::size_t>(n - 1)] = acc.value();
  }
  return path;
}

double cosine_value(std::int64_t n, double x) noexcept {
  return std::cos(2.0 * std::numbers::pi * as_real(n) * x);
}

const MomentProfile& SequenceFamily::require_moments() const {
  if (!moments_) {
    throw Error(ErrorKind::moments_unavailable,
                "family '" + descriptor_.display_name() + "' has no analytic moment profile");
  }
  return *moments_;
}

Latents SequenceFamily::sample_values(std::int64_t horizon, std::uint64_t seed,
                                      std::vector<double>& out, const SampleOptions& options) const {
  if (horizon < 1) throw Error(ErrorKind::invalid_params, "horizon must be at least 1");
  if (horizon > options.max_horizon) {
    throw Error(ErrorKind::horizon_overflow, "horizon " + std::to_string(horizon) +
                                                 " exceeds the limit " +
                                                 std::to_string(options.max_horizon));
  }
  const std::uint64_t trajectory_key = derive_key(seed, 0x7472616a6563ULL);
  const CounterStream latent_stream(derive_key(trajectory_key, 0));
  const CounterStream value_stream(derive_key(trajectory_key, 1));

  out.resize(static_cast<std::size_t>(horizon));
  Latents latents;
  switch (descriptor_.base) {
    case FamilyKind::cosine: {
      const double x = options.force_latent_x.value_or(latent_stream.uniform(0, -1.0, 1.0));
      latents.x = x;
      for (std::int64_t n = 1; n <= horizon; ++n) out[static_cast<std::size_t>(n - 1)] = cosine_value(n, x);
      break;
    }
    case FamilyKind::gated_gaussian: {
      const int w = options.force_latent_w.value_or(latent_stream.bernoulli(0, 0.5) ? 1 : 0);
      latents.w = w;
      for (std::int64_t n = 1; n <= horizon; ++n) {
        out[static_cast<std::size_t>(n - 1)] =
            w == 0 ? 0.0 : value_stream.normal(static_cast<std::uint64_t>(n));
      }
      break;
    }
    case FamilyKind::step:
      for (std::int64_t n = 1; n <= horizon; ++n) {
        out[static_cast<std::size_t>(n - 1)] =
            value_stream.bernoulli(static_cast<std::uint64_t>(n), 0.5) ? as_real(n) : 0.0;
      }
      break;
    case FamilyKind::iid: {
      const IidParams& q = descriptor_.iid;
      for (std::int64_t n = 1; n <= horizon; ++n) {
        const auto c = static_cast<std::uint64_t>(n);
        double x = 0.0;
        switch (q.base) {
          case IidBase::exponential: x = value_stream.exponential(c, q.rate); break;
          case IidBase::uniform: x = value_stream.uniform(c, q.lower, q.upper); break;
          case IidBase::bernoulli_scaled:
            x = value_stream.bernoulli(c, q.probability) ? q.scale : 0.0;
            break;
          case IidBase::constant: x = q.value; break;
        }
        out[static_cast<std::size_t>(n - 1)] = x;
      }
      break;
    }
    case FamilyKind::transformed:
      throw Error(ErrorKind::unknown_kind, "invalid base kind");
  }

  for (const Stage& stage : stages_) {
    for (std::int64_t n = 1; n <= horizon; ++n) {
      double& x = out[static_cast<std::size_t>(n - 1)];
      x = apply_stage(stage.transform, stage.offset, n, x);
    }
  }
  return latents;
}

Trajectory SequenceFamily::sample(std::int64_t horizon, std::uint64_t seed,
                                  const SampleOptions& options) const {
  Trajectory t;
  t.descriptor = descriptor_;
  t.seed = seed;
  t.latents = sample_values(horizon, seed, t.values, options);
  t.prefix_sums.resize(t.values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    running += t.values[i];
    t.prefix_sums[i] = running;
  }
  return t;
}

SequenceFamily make_family(const FamilyDescriptor& descriptor) {
  descriptor.validate();
  SequenceFamily family;
  family.descriptor_ = descriptor;
  family.descriptor_.transforms.clear();
  switch (descriptor.base) {
    case FamilyKind::cosine: family.moments_ = cosine_profile(); break;
    case FamilyKind::gated_gaussian: family.moments_ = gated_gaussian_profile(); break;
    case FamilyKind::step: family.moments_ = step_profile(); break;
    case FamilyKind::iid: family.moments_ = iid_base_profile(descriptor.iid); break;
    case FamilyKind::transformed: throw Error(ErrorKind::unknown_kind, "invalid base kind");
  }
  for (const Transform& t : descriptor.transforms) family = transform_family(family, t);
  family.descriptor_.label = descriptor.label;
  return family;
}

Trajectory sample_trajectory(const SequenceFamily& family, std::int64_t horizon, std::uint64_t seed,
                             const SampleOptions& options) {
  return family.sample(horizon, seed, options);
}

MomentRecord analytic_moment(const SequenceFamily& family, std::int64_t n) {
  if (n < 1) throw Error(ErrorKind::invalid_params, "index must be at least 1");
  const MomentProfile& p = family.require_moments();
  return {p.mean(n), p.variance(n), p.mean_sum_at(n), p.essinf(n)};
}

SequenceFamily transform_family(const SequenceFamily& family, const Transform& transform) {
  if (family.descriptor_.transforms.size() >= kMaxTransformDepth) {
    throw Error(ErrorKind::invalid_params, "transform chain deeper than " +
                                               std::to_string(kMaxTransformDepth));
  }
  if (transform.kind == TransformKind::affine &&
      (!finite(transform.scale) || !finite(transform.shift))) {
    throw Error(ErrorKind::invalid_params, "affine coefficients must be finite");
  }

  const bool pristine = family.descriptor_.transforms.empty();
  const FamilyKind base = family.descriptor_.base;
  const std::optional<MomentProfile>& prior = family.moments_;

  SequenceFamily out = family;
  out.descriptor_.transforms.push_back(transform);
  SequenceFamily::Stage stage{transform, {}};
  std::optional<MomentProfile> moments;

  switch (transform.kind) {
    case TransformKind::center: {
      const MomentProfile& p = family.require_moments();
      stage.offset = p.mean;
      moments = shifted_profile(p, p.mean);
      moments->mean = [](std::int64_t) { return 0.0; };
      moments->mean_sum = [](std::int64_t) { return 0.0; };
      break;
    }
    case TransformKind::essinf_shift: {
      const MomentProfile& p = family.require_moments();
      if (!finite(p.essinf(1))) {
        throw Error(ErrorKind::moments_unavailable,
                    "essential infimum of '" + family.descriptor_.display_name() + "' is not finite");
      }
      stage.offset = p.essinf;
      moments = shifted_profile(p, p.essinf);
      moments->essinf = [](std::int64_t) { return 0.0; };
      moments->uniform_lower_bound = 0.0;
      break;
    }
    case TransformKind::affine:
      if (prior) moments = affine_profile(*prior, transform.scale, transform.shift);
      break;
    case TransformKind::truncate:
      // Step values lie in {0, n} and cosine values in [-1, 1], so X_n <= n
      // surely and truncation changes nothing.
      if (pristine && (base == FamilyKind::step || base == FamilyKind::cosine)) {
        moments = prior;
      } else if (pristine && base == FamilyKind::iid &&
                 family.descriptor_.iid.base == IidBase::exponential) {
        moments = truncated_exponential_profile(family.descriptor_.iid.rate);
      }
      break;
    case TransformKind::positive_part:
    case TransformKind::negative_part: {
      const bool positive = transform.kind == TransformKind::positive_part;
      if (prior && prior->nonnegative()) {
        moments = positive ? prior : std::optional<MomentProfile>(zero_profile());
      } else if (pristine && base == FamilyKind::gated_gaussian) {
        moments = gated_gaussian_part_profile();
      } else if (pristine && base == FamilyKind::cosine) {
        moments = cosine_part_profile();
      }
      break;
    }
  }

  out.stages_.push_back(std::move(stage));
  out.moments_ = std::move(moments);
  return out;
}

}  // namespace llnlab
