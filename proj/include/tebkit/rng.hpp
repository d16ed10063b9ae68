#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace tebkit {

/// Seeded xoshiro256** generator with SplitMix64 seeding.
///
/// A generator is identified by (seed, stream). Distinct streams of the same
/// seed are statistically independent, so a replication, an image or an
/// epoch can own a substream keyed by its index and results do not depend
/// on scheduling order.
///
/// All derived variates are computed here rather than through <random>
/// distributions, whose algorithms differ between standard libraries:
///  - uniform(): top 53 bits scaled by 2^-53, in [0, 1).
///  - normal(): Box-Muller on (1 - u1, u2); the sine branch is cached and
///    returned by the next call.
///  - below(n): Lemire's multiply-shift rejection method, unbiased.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Child generator for a sub-task; does not advance this generator.
  Rng substream(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Stateless 64-bit mix of two words, used to derive stream keys.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace tebkit
