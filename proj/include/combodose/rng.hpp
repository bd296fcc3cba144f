#pragma once

#include <cstdint>
#include <random>

namespace combodose {

// mt19937_64 has a standard-mandated output sequence; all distributions
// used on top of it come from Boost.Random, whose algorithms do not vary
// between standard library implementations.
using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for stream (a, b) of a parent seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b = 0) {
  return mix64(mix64(mix64(parent) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Stream tags for derive_seed.
enum class Stream : std::uint64_t {
  toxicity_chain = 1,
  efficacy_chain = 2,
  fit = 3,
  allocation = 4,
  outcomes = 5,
  trial = 6,
  session = 7,
};

constexpr std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace combodose
