#pragma once

// Physical constants and the Hz <-> rad/s boundary conversion.
//
// Everything inside the library is angular (rad/s). Files and configs speak
// ordinary frequency (Hz); convert only at that boundary.

#include <cmath>
#include <initializer_list>
#include <numbers>

namespace omem {

namespace constants {
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double boltzmann = 1.380649e-23;     // J/K
inline constexpr double speed_of_light = 299792458.0; // m/s
} // namespace constants

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Ordinary frequency (Hz) to angular frequency (rad/s).
constexpr double hz_to_angular(double hz) noexcept { return two_pi * hz; }

/// Angular frequency (rad/s) to ordinary frequency (Hz).
constexpr double angular_to_hz(double rad_per_s) noexcept { return rad_per_s / two_pi; }

inline bool all_finite(std::initializer_list<double> values) noexcept
{
  for (double v : values)
    if (!std::isfinite(v))
      return false;
  return true;
}

} // namespace omem
