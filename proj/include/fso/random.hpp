#pragma once

#include <cstdint>
#include <random>

namespace fso {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for an independent stream. Chunked generators derive one seed
/// per (seed, stream, index) so output never depends on how the chunks are
/// scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index = 0) {
  return Engine(derive_seed(seed, stream, index));
}

// Stream identifiers.
namespace streams {
inline constexpr std::uint64_t kTraceA = 0x7472616365410000ULL;
inline constexpr std::uint64_t kTraceB = 0x7472616365420000ULL;
inline constexpr std::uint64_t kChannelNoise = 0x6e6f697365000000ULL;
inline constexpr std::uint64_t kPayload = 0x7061796c6f616400ULL;
inline constexpr std::uint64_t kScrambler = 0x736372616d626c65ULL;
inline constexpr std::uint64_t kQdNoise = 0x71646e6f69736500ULL;
inline constexpr std::uint64_t kDisturbX = 0x6469737478000000ULL;
inline constexpr std::uint64_t kDisturbY = 0x6469737479000000ULL;
}  // namespace streams

}  // namespace fso
