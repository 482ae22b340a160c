#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace face_manifold {

using Rng = std::mt19937_64;

/// Mixes a user seed, a purpose tag and up to two indices into an independent
/// 64-bit stream seed (splitmix64 finalizer over an FNV-1a hash of the tag).
/// Every random draw in the library comes from a stream derived this way, so
/// results never depend on evaluation order or thread count.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                          std::uint64_t index = 0, std::uint64_t sub = 0);

inline Rng make_stream(std::uint64_t seed, std::string_view tag,
                       std::uint64_t index = 0, std::uint64_t sub = 0) {
  return Rng{derive_seed(seed, tag, index, sub)};
}

}  // namespace face_manifold
