#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace posecut {

// Named random streams split from one root seed. Every consumer of
// randomness asks for its own stream, so adding a consumer never shifts
// the draws of another.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a64(stream)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(root, stream, index));
}

}  // namespace posecut
