#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace clamshell {

using Rng = std::mt19937_64;

// FNV-1a; stable across builds and platforms, unlike std::hash.
std::uint64_t stable_hash(std::string_view text) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Combines a base seed with a list of keys into an independent stream seed.
template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t base, Keys... keys) noexcept {
  std::uint64_t s = splitmix64(base);
  ((s = splitmix64(s ^ static_cast<std::uint64_t>(keys))), ...);
  return s;
}

template <typename... Keys>
Rng make_stream(std::uint64_t base, Keys... keys) {
  return Rng{derive_seed(base, keys...)};
}

double uniform01(Rng& rng);
double standard_normal(Rng& rng);

}  // namespace clamshell
