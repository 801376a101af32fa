#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace rapc {

/// SplitMix64 finalizer. Used to derive independent seeds for sub-streams.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives the seed of sub-stream `stream` from a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Seeded generator with portable distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions below are written out rather than taken from
/// <random> because the standard leaves their algorithms to the library
/// vendor, and generated instances must be bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// A child generator whose stream depends only on (this seed, stream id).
  static Rng substream(std::uint64_t root, std::uint64_t stream) {
    return Rng(derive_seed(root, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal (Marsaglia polar method).
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang, with the shape < 1 boost.
  double gamma(double shape);

  /// Index drawn from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rapc
