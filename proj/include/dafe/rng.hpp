#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dafe {

// All randomness descends from one root seed. Each consumer derives its
// own stream by hashing a label, so adding draws to one component never
// perturbs another.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t split_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : label) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 1099511628211ull;
  }
  return splitmix64(root ^ splitmix64(h));
}

inline std::uint64_t split_seed(std::uint64_t root, std::string_view label,
                                std::uint64_t index) {
  return splitmix64(split_seed(root, label) ^ splitmix64(index));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::string_view label) {
  return Rng(split_seed(root, label));
}

}  // namespace dafe
