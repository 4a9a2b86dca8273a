#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace nettomo {

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
///
/// All variates below are produced by hand-written transforms on top of the
/// raw 64-bit stream, never by `<random>` distributions, whose algorithms are
/// implementation-defined. A fixed seed therefore gives the same draws on
/// every platform with IEEE doubles and a conforming libm.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Uniform integer on [lo, hi], unbiased (Lemire rejection).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  /// Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate);
  std::int64_t poisson(double mean);

  /// Returns an independent stream and advances this one by 2^128 draws.
  Rng split();

 private:
  Rng() = default;
  void jump();

  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Samples an index with probability proportional to exp(log_weights[i]).
/// Entries equal to -inf have zero mass. Requires at least one finite entry.
std::size_t sample_log_weights(std::span<const double> log_weights, Rng& rng);

/// Threshold between inversion and the transformed-rejection sampler.
inline constexpr double kPoissonInversionLimit = 30.0;

}  // namespace nettomo
