#pragma once

#include <cstdint>
#include <initializer_list>

namespace bcp {

// Counter-based random streams.
//
// Every random decision in the library is a pure function of
// (seed, stream tag, stream ids..., counter).  Nothing is stateful, so results
// never depend on evaluation order, caching, or how work is split across
// threads.  The generator is the splitmix64 finalizer over an affine counter
// walk, which passes standard statistical batteries and gives O(1) random
// access.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Fold an arbitrary key tuple into one 64-bit stream key.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8422a9d4b01d3c39ull;
  for (std::uint64_t p : parts) h = mix64((h + kGolden) ^ p);
  return h;
}

// Stream tags keep unrelated random decisions in disjoint streams.
enum StreamTag : std::uint64_t {
  kTagTopology = 1,
  kTagEdgeLength = 2,
  kTagRootState = 3,
  kTagEdgeFlip = 4,
  kTagJcTransition = 5,
  kTagTieBreak = 6,
  kTagTrial = 7,
};

inline std::uint64_t bits_at(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * kGolden);
}

// Uniform double in [0, 1) with 53 random bits.
inline double u01_at(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(bits_at(key, counter) >> 11) * 0x1.0p-53;
}

inline bool bernoulli_at(std::uint64_t key, std::uint64_t counter, double p) {
  return u01_at(key, counter) < p;
}

// Fair +1/-1 coin (used for majority tie breaking).
inline int sign_bit_at(std::uint64_t key, std::uint64_t counter) {
  return (bits_at(key, counter) >> 63) ? +1 : -1;
}

// Uniform integer in [0, n) by fixed-point multiplication (n << 2^64, so the
// modulo bias is far below anything observable here).
inline std::uint64_t below_at(std::uint64_t key, std::uint64_t counter,
                              std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(bits_at(key, counter)) * n) >> 64);
}

}  // namespace bcp
