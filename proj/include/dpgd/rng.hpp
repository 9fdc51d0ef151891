#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dpgd {

/// Purpose tags that separate independent random streams drawn from one seed.
enum class StreamTag : std::uint32_t {
  train_example = 1,
  test_example = 2,
  weight_init = 3,
  dp_noise = 4,
  kernel_noise = 5,
  auxiliary = 6,
};

/// Philox4x32 with 10 rounds (Salmon et al., Random123). Stateless block function.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to fold seeds and tags into Philox keys.
std::uint64_t mix64(std::uint64_t x);

/// Derive a child seed from a base seed and two coordinates (sweep cells, repeats).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/*
 * A counter-based random stream identified by (seed, tag, index).
 *
 * Two streams with different identities are statistically independent, and a
 * stream can be re-created at any time to replay the exact same values, which
 * is what makes per-example and per-step generation order-independent.
 * Satisfies UniformRandomBitGenerator so it composes with <random> if needed,
 * but uniform() and normal() are implemented here for cross-platform bitwise
 * reproducibility.
 */
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, StreamTag tag, std::uint64_t index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller; pairs are cached.
  double normal();
  double normal(double stddev) { return stddev * normal(); }
  /// +1 or -1 with equal probability.
  int rademacher();

 private:
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t index_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace dpgd
