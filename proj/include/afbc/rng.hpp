#ifndef AFBC_RNG_HPP
#define AFBC_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace afbc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent generator for a named consumer from one global seed.
// Streams are keyed by (seed, name, index) so the order in which components
// draw numbers never affects any other component.
inline Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ fnv1a64(name));
  key = splitmix64(key ^ index);
  return Rng(key);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace afbc

#endif  // AFBC_RNG_HPP
