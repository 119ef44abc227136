#pragma once

#include <cstdint>
#include <random>

namespace hinav {

// Platform-independent 64-bit mixer. Used wherever a value must be a pure
// deterministic function of its key (view descriptors, derived seeds), as
// opposed to ephemeral sampling where std::mt19937_64 is fine.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Uniform double in [0, 1) from a hashed key.
constexpr double hash_unit(std::uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

// Uniform double in [-1, 1).
constexpr double hash_symmetric(std::uint64_t key) {
  return 2.0 * hash_unit(key) - 1.0;
}

// Combine keys into one stream id; order-sensitive.
constexpr std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ull + b));
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_keys(mix_keys(a, b), c);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace hinav
