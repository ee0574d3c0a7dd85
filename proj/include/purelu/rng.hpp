// Counter-based deterministic random streams. Every draw is a pure function
// of (master seed, stream id, counter), so parallel and serial sampling give
// identical bits regardless of execution order.
#ifndef PURELU_RNG_HPP
#define PURELU_RNG_HPP

#include <cmath>
#include <cstdint>

namespace purelu {

namespace detail {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer: bijective with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Inverse normal CDF (Acklam's rational approximation, ~1e-9 relative),
// adequate for instance generation.
inline double inv_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) {
    q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace detail

/// A (seed, stream) pair addressing an independent random stream. Copyable
/// value type; draws take an explicit counter and carry no state.
class Rng {
 public:
  Rng() : base_(derive(0, 0)) {}
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(derive(seed, stream)) {}

  /// Child stream under a fixed label; labels at one level must be distinct.
  Rng sub(std::uint64_t label) const {
    Rng r;
    r.base_ = detail::mix64(base_ ^ detail::mix64(label * 0x632be59bd9b4e019ULL + 1));
    return r;
  }

  std::uint64_t u64(std::uint64_t ctr) const {
    return detail::mix64(base_ + ctr * detail::kGamma);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double u01(std::uint64_t ctr) const {
    return double(u64(ctr) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t ctr, double lo, double hi) const {
    return lo + (hi - lo) * u01(ctr);
  }

  /// Standard normal via inverse CDF; one counter per draw.
  double normal(std::uint64_t ctr) const {
    // Clamp away from 0 to keep the transform finite.
    double p = u01(ctr);
    if (p < 1e-300) p = 1e-300;
    return detail::inv_normal_cdf(p);
  }

  /// Uniform integer in [0, bound) by rejection-free multiply-shift; bias is
  /// below 2^-32 for bound < 2^32, fine for index draws.
  std::uint64_t index(std::uint64_t ctr, std::uint64_t bound) const {
    return std::uint64_t((__uint128_t(u64(ctr)) * bound) >> 64);
  }

  friend bool operator==(const Rng& a, const Rng& b) { return a.base_ == b.base_; }

 private:
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return detail::mix64(detail::mix64(seed ^ 0x8c2f9d154a6b3e07ULL) ^
                         detail::mix64(stream * 0xd6e8feb86659fd93ULL + 5));
  }

  std::uint64_t base_;
};

/// Fixed top-level stream labels (one namespace per consumer).
namespace stream {
inline constexpr std::uint64_t kGroundTruth = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kBatch = 3;    // then .sub(iteration)
inline constexpr std::uint64_t kPairs = 4;    // then .sub(iteration)
inline constexpr std::uint64_t kEstimate = 5; // equilibration moment batches
inline constexpr std::uint64_t kAudit = 6;    // lemma audit draws
inline constexpr std::uint64_t kSweep = 7;    // then .sub(point index)
}  // namespace stream

}  // namespace purelu

#endif  // PURELU_RNG_HPP
