#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sotead {

// Independent generator for a named purpose ("train", "synth", ...) derived
// from the one user seed. FNV-1a keeps the derivation stable across platforms.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace sotead
