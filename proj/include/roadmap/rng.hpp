// Purpose: deterministic seed derivation so every randomized component
// (samplers, generators, checkers) draws from its own stream of a single
// user-visible seed. Same seed in, same bytes out, run after run.
#pragma once

#include <cstdint>
#include <random>

namespace roadmap {

// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
inline std::uint64_t mix_bits(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream id under one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_bits(base ^ mix_bits(stream));
}

inline std::mt19937_64 make_engine(std::uint64_t base, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(base, stream));
}

}  // namespace roadmap
