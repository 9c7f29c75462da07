#pragma once

#include <cstdint>
#include <random>

namespace tilesieve {

// Seeded generator with distribution code written out by hand: the standard
// library distributions are implementation-defined, and every model, shuffle
// and synthetic image must be reproducible across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller (no cached second value).
  double normal();

private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace tilesieve
