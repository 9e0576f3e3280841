#pragma once

// Reproducible parallel Monte Carlo: every replica r of a run with root seed s
// draws from its own generator seeded by stream_seed(s, r). The derivation is
// counter-based (a SplitMix64 finalizer of the pair), so replica streams are
// independent of thread count and of each other's consumption.

#include <cstdint>
#include <random>
#include <span>

namespace brwx::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(root + (index + 1) * kGamma);
}

// reserved stream ids for shared reference samples; replica streams use 0..R-1
inline constexpr std::uint64_t kReferenceStreamBase = 1ull << 48;

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t root, std::uint64_t index) {
  return Engine(stream_seed(root, index));
}

inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// single-uniform categorical draw over a finite probability vector
inline std::size_t categorical(Engine& eng, std::span<const double> probs) {
  double u = uniform01(eng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.empty() ? 0 : probs.size() - 1;
}

}  // namespace brwx::rng
