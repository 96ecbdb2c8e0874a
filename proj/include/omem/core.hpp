#pragma once

// Static optomechanical parameters and the elementary derived quantities:
// mechanical susceptibility, intracavity photon number, optical damping,
// cooperativity and the heating-limited coherence time.

#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omem/units.hpp"

namespace omem {

using complex = std::complex<double>;

/// Optomechanical system parameters in internal units (rad/s, W, m, s).
///
/// `delta` is the control detuning ΩL - Ωcav; the red side is negative.
/// `kappa` is the full cavity linewidth (energy decay rate).
struct SystemParams {
  double omega_m = 0.0;
  double gamma_m = 0.0;
  double kappa = 0.0;
  double eta_c = 1.0;
  double g0 = 0.0;
  double delta = 0.0;
  double p_in = 0.0;
  double lambda_l = 1550e-9;
  std::optional<double> t1; // dark-storage lifetime, 1/gamma_m when unset
  double eta_loss = 1.0;
  double eta_qe = 1.0;

  /// Builds Γm from a quality factor, Γm = Ωm/Q.
  static double gamma_from_q(double omega_m, double q) { return omega_m / q; }

  double quality_factor() const noexcept
  {
    return gamma_m > 0.0 ? omega_m / gamma_m : std::numeric_limits<double>::infinity();
  }

  double storage_t1() const noexcept
  {
    if (t1)
      return *t1;
    return gamma_m > 0.0 ? 1.0 / gamma_m : std::numeric_limits<double>::infinity();
  }

  double laser_angular_frequency() const noexcept
  {
    return two_pi * constants::speed_of_light / lambda_l;
  }

  bool sideband_resolved() const noexcept { return omega_m > kappa; }

  void validate() const
  {
    if (!all_finite({omega_m, gamma_m, kappa, eta_c, g0, delta, p_in, lambda_l, eta_loss, eta_qe}))
      throw std::invalid_argument("SystemParams: non-finite field");
    if (omega_m <= 0.0)
      throw std::invalid_argument("SystemParams: omega_m must be > 0");
    if (kappa <= 0.0)
      throw std::invalid_argument("SystemParams: kappa must be > 0");
    if (gamma_m < 0.0)
      throw std::invalid_argument("SystemParams: gamma_m must be >= 0");
    if (g0 < 0.0)
      throw std::invalid_argument("SystemParams: g0 must be >= 0");
    if (p_in < 0.0)
      throw std::invalid_argument("SystemParams: p_in must be >= 0");
    if (lambda_l <= 0.0)
      throw std::invalid_argument("SystemParams: lambda_l must be > 0");
    if (!(eta_c > 0.0 && eta_c <= 1.0))
      throw std::invalid_argument("SystemParams: eta_c must lie in (0, 1]");
    if (!(eta_loss > 0.0 && eta_loss <= 1.0))
      throw std::invalid_argument("SystemParams: eta_loss must lie in (0, 1]");
    if (!(eta_qe > 0.0 && eta_qe <= 1.0))
      throw std::invalid_argument("SystemParams: eta_qe must lie in (0, 1]");
    if (t1 && !(*t1 >= 0.0))
      throw std::invalid_argument("SystemParams: t1 must be >= 0");
  }

  /// Non-fatal conditions worth reporting (regime outside the model's comfort zone).
  std::vector<std::string> warnings() const
  {
    std::vector<std::string> out;
    if (!sideband_resolved())
      out.emplace_back("unresolved sidebands: omega_m <= kappa, rotating-wave results are approximate");
    if (delta > 0.0)
      out.emplace_back("blue-detuned control: optical damping is negative (amplification)");
    return out;
  }
};

/// Drive-dependent quantities at the configured control power and detuning.
struct DriveState {
  double n_cav = 0.0;
  double g = 0.0;
  double gamma_opt = 0.0;
  double gamma_eff = 0.0;
  std::optional<double> cooperativity;
};

/// Mechanical susceptibility χm(ω) = [γ/2 - i(ω - ωm)]⁻¹.
inline complex mech_susceptibility(double omega, double omega_m, double gamma)
{
  if (!all_finite({omega, omega_m, gamma}))
    throw std::invalid_argument("mech_susceptibility: non-finite input");
  if (gamma <= 0.0)
    throw std::invalid_argument("mech_susceptibility: gamma must be > 0");
  return 1.0 / complex(gamma / 2.0, -(omega - omega_m));
}

/// Mean intracavity photon number for the control field at detuning p.delta.
inline double cavity_photon_number(const SystemParams& p)
{
  const double half_kappa = p.kappa / 2.0;
  const double flux = p.p_in / (constants::hbar * p.laser_angular_frequency());
  return flux * p.eta_c * p.kappa / (half_kappa * half_kappa + p.delta * p.delta);
}

/// Control power that produces `n_cav` photons at detuning p.delta.
inline double power_for_photon_number(const SystemParams& p, double n_cav)
{
  const double half_kappa = p.kappa / 2.0;
  return n_cav * constants::hbar * p.laser_angular_frequency() *
         (half_kappa * half_kappa + p.delta * p.delta) / (p.eta_c * p.kappa);
}

/// Optical damping from the two motional sidebands; antisymmetric in Δ.
inline double gamma_opt(const SystemParams& p, double n_cav)
{
  const double hk2 = (p.kappa / 2.0) * (p.kappa / 2.0);
  const double anti_stokes = 1.0 / (hk2 + (p.delta + p.omega_m) * (p.delta + p.omega_m));
  const double stokes = 1.0 / (hk2 + (p.delta - p.omega_m) * (p.delta - p.omega_m));
  return n_cav * p.g0 * p.g0 * p.kappa * (anti_stokes - stokes);
}

/// C = 4 g0² n̄cav / (κ Γm); empty when Γm = 0.
inline std::optional<double> cooperativity(const SystemParams& p, double n_cav)
{
  if (p.gamma_m <= 0.0)
    return std::nullopt;
  return 4.0 * p.g0 * p.g0 * n_cav / (p.kappa * p.gamma_m);
}

inline DriveState drive_state(const SystemParams& p)
{
  p.validate();
  DriveState d;
  d.n_cav = cavity_photon_number(p);
  d.g = p.g0 * std::sqrt(d.n_cav);
  d.gamma_opt = gamma_opt(p, d.n_cav);
  d.gamma_eff = p.gamma_m + d.gamma_opt;
  d.cooperativity = cooperativity(p, d.n_cav);
  return d;
}

enum class Occupancy { classical, bose };

/// Thermal phonon occupancy; classical limit kB T/ħΩm by default.
inline double thermal_occupancy(double temperature, double omega_m, Occupancy model = Occupancy::classical)
{
  const double x = constants::hbar * omega_m / (constants::boltzmann * temperature);
  if (model == Occupancy::bose)
    return 1.0 / std::expm1(x);
  return 1.0 / x;
}

/// Heating-limited coherence time 1/(Γm n̄th) with Γm = Ωm/Q.
inline double coherence_time(double temperature, double omega_m, double q,
                             Occupancy model = Occupancy::classical)
{
  if (!(temperature > 0.0))
    throw std::invalid_argument("coherence_time: bath temperature must be > 0");
  if (!(omega_m > 0.0) || !(q > 0.0))
    throw std::invalid_argument("coherence_time: omega_m and q must be > 0");
  const double gamma_m = omega_m / q;
  return 1.0 / (gamma_m * thermal_occupancy(temperature, omega_m, model));
}

/// Device parameters of the soft-clamped membrane memory at room temperature.
///
/// Control power 2.1 mW puts n̄cav ≈ 5.0e8 at Δ = -Ωm, i.e. C ≈ 4e4.
inline SystemParams reference_device()
{
  SystemParams p;
  p.omega_m = hz_to_angular(2.4e6);
  p.gamma_m = SystemParams::gamma_from_q(p.omega_m, 1e8);
  p.kappa = hz_to_angular(2.1e6);
  p.eta_c = 0.63;
  p.g0 = hz_to_angular(1.0);
  p.delta = -p.omega_m;
  p.p_in = 2.1e-3;
  p.lambda_l = 1550e-9;
  p.t1 = 23e-3;
  p.eta_loss = 0.60;
  p.eta_qe = 0.83;
  return p;
}

} // namespace omem
