#ifndef EE_RNG_HPP
#define EE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ee {

/// SplitMix64 finalizer. Used only to turn (seed, stream) pairs into
/// well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed splitting rule: child = splitmix64(splitmix64(parent) ^ stream).
/// Replicate r of a run with master seed s uses derive_seed(s, r); chain k
/// inside that replicate uses derive_seed(derive_seed(s, r), k).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return splitmix64(splitmix64(parent) ^ stream);
}

/// Random stream with a platform-independent draw sequence.
///
/// The standard distributions are implementation-defined, so uniforms,
/// bounded integers and normals are derived directly from the raw 64-bit
/// mt19937_64 output. Every call consumes a fixed number of engine words
/// except uniform_index, which uses rejection.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Lemire's nearly-divisionless method.
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller; always consumes two uniforms.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ee

#endif  // EE_RNG_HPP
