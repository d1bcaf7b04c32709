#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rlihf {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to turn structured seed material into
/// well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, stable across platforms (std::hash is not).
constexpr std::uint64_t hash_name(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) noexcept {
  return mix64(base ^ mix64(salt));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose) noexcept {
  return derive_seed(base, hash_name(purpose));
}

/// Uniform double in [0, 1) built from the top 53 bits; unlike
/// std::uniform_real_distribution the output is specified bit-for-bit.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace rlihf
