#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hrrp {

// Seed-stream scheme: every consumer of randomness derives its own 64-bit
// seed from the master seed plus a textual tag (and optional indices), then
// owns a private mt19937_64. Derivations are pure, so independent streams
// can be drawn in any order without affecting each other.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= uint64_t(uint8_t(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag,
                            uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = splitmix64(master ^ fnv1a64(tag));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view tag,
                                uint64_t a = 0, uint64_t b = 0) {
  return std::mt19937_64(derive_seed(master, tag, a, b));
}

}  // namespace hrrp
