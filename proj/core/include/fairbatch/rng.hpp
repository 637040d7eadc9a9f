#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace fairbatch {

/// Deterministic pseudo-random source built on std::mt19937_64 with explicit
/// substreams. A (seed, stream) pair fully determines the output sequence;
/// distribution sampling is implemented here rather than via <random>
/// distribution classes, whose output is not pinned down by the standard.
///
/// Substream convention used by the library (one stream per purpose):
///   label draws = 1, feature draws = 2, sensitive-attribute draws = 3,
///   train/test split = 4, batch sampling = 5, cutting = 6.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: n must be > 0");
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  /// Standard normal via Box-Muller; the second variate of each pair is
  /// cached, so draws are consumed from the underlying stream two at a time.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * pi() * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

  /// Categorical draw by CDF inversion over non-negative weights.
  /// Weights need not be normalized; their sum must be positive.
  std::size_t next_categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0))
      throw std::invalid_argument("Rng::next_categorical: weights sum to 0");
    const double u = next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    // u landed in the rounding slack past the last positive weight
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    throw std::invalid_argument("Rng::next_categorical: no positive weight");
  }

  static constexpr double pi() { return 3.141592653589793238462643383279502884; }

 private:
  /// splitmix64 finalizer applied to the (seed, stream) pair; distinct
  /// streams from the same seed are decorrelated by construction.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream ids for the library's named substreams.
namespace rng_stream {
inline constexpr std::uint64_t labels = 1;
inline constexpr std::uint64_t features = 2;
inline constexpr std::uint64_t sensitive = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t batches = 5;
inline constexpr std::uint64_t cutting = 6;
}  // namespace rng_stream

}  // namespace fairbatch
