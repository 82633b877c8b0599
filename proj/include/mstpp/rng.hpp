#pragma once

#include <cstdint>
#include <random>

namespace mstpp {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for substream `stream` of `seed`. Streams are
/// addressed by index, so results do not depend on construction order.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(~stream)));
}

// Stream ids reserved by the library so different components never share one.
inline constexpr std::uint64_t kSamplerStream = 0xA11CE00000000000ULL;
inline constexpr std::uint64_t kSimulationStream = 0x51A0000000000000ULL;

}  // namespace mstpp
