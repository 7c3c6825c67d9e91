#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace daavm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_u64(std::uint64_t seed, std::uint64_t v) {
  return splitmix64(seed ^ splitmix64(v));
}

inline std::uint64_t hash_str(std::string_view s) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

using Rng = std::mt19937_64;

// Named sub-stream derivation: every stage of a pipeline draws from an engine
// seeded by (master seed, stream name, index), so stages are reproducible
// independently of how much randomness the other stages consumed.
inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(hash_u64(hash_u64(seed, hash_str(name)), index));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace daavm
