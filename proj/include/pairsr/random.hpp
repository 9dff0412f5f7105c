#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace pairsr {

/// mt19937_64 with portable derived distributions. The standard library
/// distributions are implementation-defined, so index and real draws are
/// derived here directly from the engine output to keep seeded runs
/// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, n) without modulo bias. n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one draw per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// First `count` entries of a seeded partial Fisher-Yates shuffle of
/// [0, population): a uniform sample without replacement.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Rng& rng);

}  // namespace pairsr
