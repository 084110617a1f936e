#pragma once

#include <cstdint>
#include <random>

namespace pimdn {

/// SplitMix64 finalizer. Used only to derive seeds, never as a stream.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `stream` of a run seeded with `seed`:
/// splitmix64(splitmix64(seed) ^ stream).
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ stream);
}

/// Stream ids used with child_seed() across the toolkit.
namespace streams {
inline constexpr std::uint64_t init = 1;        // network initialization
inline constexpr std::uint64_t data = 2;        // dataset generators
inline constexpr std::uint64_t subsample = 3;   // dataset subsampling
inline constexpr std::uint64_t training = 4;    // per-iteration draws (flow matching)
inline constexpr std::uint64_t sampling = 5;    // model sampling
}  // namespace streams

/// The one random source of the toolkit.
///
/// Engine: std::mt19937_64 (bit-exact across standard libraries).
/// uniform(): top 53 bits of one engine draw scaled by 2^-53, in [0, 1).
/// normal():  Box-Muller, cosine branch only, two uniforms per normal:
///            sqrt(-2 ln(1 - u1)) * cos(2 pi u2).
/// The distributions are written out here rather than taken from <random>
/// because std::normal_distribution is implementation defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Generator for an independent child stream.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(child_seed(seed, stream_id));
  }

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace pimdn
