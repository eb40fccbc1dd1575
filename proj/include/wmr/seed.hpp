#pragma once

#include <cstdint>
#include <string_view>

#include "wmr/errors.hpp"

namespace wmr {

// 64-bit deterministic seed. Child derivation is the one place the seeding
// algorithm lives: splitmix64 finalizer over an FNV-1a absorption of the
// label, mixed with the parent. Pinned so golden values stay stable across
// implementations.
struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(const Seed&, const Seed&) = default;
};

namespace detail {

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline Seed derive_seed(Seed parent, std::string_view label) {
  if (label.empty()) throw InvalidLabel("derive_seed: empty label");
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Seed{detail::splitmix64_mix(parent.value ^ detail::splitmix64_mix(h))};
}

// Deterministic counter-based stream for internal randomness (nonces,
// synthetic data). Not a general-purpose RNG facade; modules needing
// distributions seed std::mt19937_64 from a derived seed instead.
class SeedStream {
 public:
  explicit SeedStream(Seed s) : state_(s.value) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return detail::splitmix64_mix(state_);
  }

 private:
  std::uint64_t state_;
};

}  // namespace wmr
