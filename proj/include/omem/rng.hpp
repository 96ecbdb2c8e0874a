#pragma once

// Portable seeded noise source.
//
// Algorithm (reproducible across implementations):
//   * engine: std::mt19937_64, whose output sequence is fixed by the standard;
//   * uniform: u = (x >> 11) * 2^-53, in [0, 1);
//   * normal: Box-Muller on (u1, u2), z0 = sqrt(-2 ln(1-u1)) cos(2π u2) and
//     z1 = ... sin(2π u2), returned in that order;
//   * per-trial seeds: the index-th output of SplitMix64 seeded with the
//     master seed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

#include "omem/units.hpp"

namespace omem {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of trial `index` derived from `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept
{
  // SplitMix64 advances its state by a fixed increment, so skip straight there.
  std::uint64_t state = master + index * 0x9e3779b97f4a7c15ULL;
  return splitmix64(state);
}

class NoiseSource {
public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal()
  {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return z;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    spare_ = radius * std::sin(two_pi * u2);
    return radius * std::cos(two_pi * u2);
  }

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

} // namespace omem
