#pragma once

// Digital lock-in: carrier synthesis of the photodetector beat and envelope
// recovery by mixing with the reference and low-pass filtering.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "omem/core.hpp"

namespace omem {

/// Detector beat V(t) = scale·Re[s(t) e^{-iΩ t}]: magnitude |s| riding on the carrier.
inline std::vector<double> synthesize_carrier(std::span<const complex> envelope, double t0, double dt,
                                              double omega_carrier, double scale = 1.0)
{
  std::vector<double> v(envelope.size());
  for (std::size_t k = 0; k < envelope.size(); ++k) {
    const double t = t0 + dt * static_cast<double>(k);
    v[k] = scale * (envelope[k] * std::exp(complex(0.0, -omega_carrier * t))).real();
  }
  return v;
}

enum class LowPass {
  zero_phase, // first-order section run forward then backward
  causal,     // single forward pass (real-time instrument)
};

struct LockinOptions {
  LowPass filter = LowPass::zero_phase;
  double t0 = 0.0; // time of the first sample, sets the reference phase
};

/// Envelope |V|(t) of a real trace sampled every `dt` seconds.
///
/// Mixes with e^{-i ω_ref t}, applies a first-order low-pass with corner
/// `lp_bandwidth` (rad/s), and returns 2|·| so a tone of amplitude A reads A.
/// Requires a sample rate of at least 10 ω_ref/2π.
inline std::vector<double> lockin_demodulate(std::span<const double> trace, double dt, double omega_ref,
                                             double lp_bandwidth, const LockinOptions& options = {})
{
  if (!(dt > 0.0) || !(omega_ref > 0.0) || !(lp_bandwidth > 0.0))
    throw std::invalid_argument("lockin_demodulate: dt, omega_ref and lp_bandwidth must be > 0");
  if (1.0 / dt < 10.0 * omega_ref / two_pi)
    throw std::invalid_argument("lockin_demodulate: sample rate below 10x the reference frequency");

  const std::size_t n = trace.size();
  std::vector<complex> y(n);
  const double alpha = -std::expm1(-lp_bandwidth * dt);
  complex state = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = options.t0 + dt * static_cast<double>(k);
    const complex mixed = trace[k] * std::exp(complex(0.0, -omega_ref * t));
    state += alpha * (mixed - state);
    y[k] = state;
  }
  if (options.filter == LowPass::zero_phase && n > 0) {
    state = y[n - 1];
    for (std::size_t k = n; k-- > 0;) {
      state += alpha * (y[k] - state);
      y[k] = state;
    }
  }
  std::vector<double> envelope(n);
  for (std::size_t k = 0; k < n; ++k)
    envelope[k] = 2.0 * std::abs(y[k]);
  return envelope;
}

} // namespace omem
