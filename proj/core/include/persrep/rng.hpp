#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace persrep {

// splitmix64 step; used to derive independent per-item seeds from one root
// seed so that parallel and serial execution produce identical streams.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t index) {
  return splitmix64(root ^ splitmix64(index + 0x51ed2701ULL));
}

inline uint64_t derive_seed(uint64_t root, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(root, a), b);
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

// FNV-1a over raw bytes. Stable across platforms, used for content digests
// (pool provenance, run manifests), not for security.
inline uint64_t fnv1a(std::span<const uint8_t> bytes, uint64_t h = 0xcbf29ce484222325ULL) {
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()), h);
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h) {
  uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<uint8_t>(v >> (8 * i));
  return fnv1a(std::span<const uint8_t>(bytes, 8), h);
}

std::string hex_digest(uint64_t h);

}  // namespace persrep
