#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace n2c {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a master seed and a path of counters.
//   s0 = mix64(master); s_{i+1} = mix64(s_i ^ (counter_i + 1) * 0xd1b54a32d192ed03)
// Used to split one master seed into independent streams per
// (slice, contrast, realization) or (epoch, step).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Stream tags used as the first path element.
namespace stream {
inline constexpr std::uint64_t kGeometry = 1;
inline constexpr std::uint64_t kIntensities = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kNetInit = 4;
inline constexpr std::uint64_t kMasking = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kGradCheck = 7;
}  // namespace stream

// Portable generator: mt19937_64 output with explicit uniform and Box-Muller
// transforms, so sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace n2c
