// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace chemamp::hash {

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value));
}

constexpr std::uint64_t combine(std::uint64_t seed, std::string_view text) noexcept {
  return combine(seed, fnv1a64(text));
}

/// Folds any mix of integers and strings into one seed. Order matters.
template <typename... Parts>
constexpr std::uint64_t derive(std::uint64_t seed, const Parts&... parts) noexcept {
  std::uint64_t h = mix64(seed);
  ((h = combine(h, parts)), ...);
  return h;
}

/// Maps a 64-bit value to [0, 1) using its top 53 bits.
constexpr double unit_interval(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace chemamp::hash
