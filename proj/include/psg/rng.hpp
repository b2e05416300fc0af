#pragma once

#include <cstdint>
#include <random>

namespace psg {

/// Independent deterministic stream for (seed, purpose, index); lets any
/// per-sample or per-epoch draw be reproduced without replaying a global
/// sequence.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t purpose,
                                   std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform in [0, 1) with 53 random bits; identical on every platform.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

/// Approximately normal via the sum of 12 uniforms (Irwin-Hall); portable,
/// unlike std::normal_distribution.
inline double normal_approx(std::mt19937_64& gen) {
  double acc = 0.0;
  for (int i = 0; i < 12; ++i) acc += uniform01(gen);
  return acc - 6.0;
}

// Stream purposes.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamShuffle = 2;
inline constexpr std::uint64_t kStreamFlip = 3;
inline constexpr std::uint64_t kStreamSynthetic = 4;
inline constexpr std::uint64_t kStreamLemma = 5;

}  // namespace psg
