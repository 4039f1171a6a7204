#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace pofel {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream per (base seed, purpose, ids...).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t s = splitmix64(base ^ fnv1a(purpose));
  for (auto id : ids) s = splitmix64(s ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::string_view purpose,
                    std::initializer_list<std::uint64_t> ids = {}) {
  return Rng(derive_seed(base, purpose, ids));
}

}  // namespace pofel
