#pragma once

#include <cstdint>
#include <random>

namespace pmcad {

// Platform-stable random source. std::mt19937_64 output is fixed by the
// standard; the distributions below are written out so that draws do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [0, n) without modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Integer uniform on [lo, hi].
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Derive a child seed from a parent seed and a stream index.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

}  // namespace pmcad
