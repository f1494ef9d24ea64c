#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace capmeter {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based seed derivation: the same (master, path) always maps to the same
// stream seed, independent of the order in which streams are requested.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Stream tags keep seeds for different purposes disjoint.
namespace stream {
inline constexpr std::uint64_t kBootstrap = 0xb0075;
inline constexpr std::uint64_t kFoldShuffle = 0xf01d;
inline constexpr std::uint64_t kTraining = 0x7a19;
inline constexpr std::uint64_t kTeacher = 0x7eac;
inline constexpr std::uint64_t kInputs = 0x19a7;
inline constexpr std::uint64_t kChain = 0xc4a1;
inline constexpr std::uint64_t kRowOrder = 0x0d3e;
}  // namespace stream

}  // namespace capmeter
