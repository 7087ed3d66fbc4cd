#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cfs {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and up to two
/// stream coordinates (splitmix64 finalizer chain).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// FNV-1a; stable across platforms, used to key seeds by identifiers.
std::uint64_t hash_string(std::string_view s) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(mix_seed(seed, a, b));
}

}  // namespace cfs
