#pragma once

// Steady-state frequency-domain response: OMIT probe reflection, the bare
// cavity limit used for calibration, dynamical-backaction sweeps and the
// transmitted control power.

#include <span>
#include <stdexcept>
#include <vector>

#include "omem/core.hpp"

namespace omem {

enum class SweepKind { broad, narrow };

struct SpectrumPoint {
  double omega_mod = 0.0; // probe offset from the control, rad/s
  complex r;
};

/// Probe reflection sampled over an increasing grid of probe offsets.
struct SpectrumTrace {
  std::vector<SpectrumPoint> points;
  SystemParams params;
  SweepKind kind = SweepKind::broad;
};

/// Probe reflection r(Ω) = 1 - ηc κ / [κ/2 - i(Δ + Ω) + g² χm(Ω)].
///
/// Single-sided cavity, rotating-wave approximation (Stokes sideband dropped).
/// χm uses the intrinsic Γm; the transparency window width Γm + 4g²/κ emerges
/// from the coupling. With g = 0 this is the bare cavity reflection.
inline complex omit_probe_response(const SystemParams& p, const DriveState& drive, double omega_mod)
{
  const complex cavity(p.kappa / 2.0, -(p.delta + omega_mod));
  complex denom = cavity;
  if (drive.g != 0.0) {
    // g² χm written without the division so Γm = 0 stays finite off resonance.
    const complex mech(p.gamma_m / 2.0, -(omega_mod - p.omega_m));
    denom += drive.g * drive.g / mech;
  }
  return 1.0 - p.eta_c * p.kappa / denom;
}

inline complex bare_cavity_response(const SystemParams& p, double omega_mod)
{
  return omit_probe_response(p, DriveState{}, omega_mod);
}

inline SpectrumTrace omit_sweep(const SystemParams& p, const DriveState& drive,
                                std::span<const double> omega_mods, SweepKind kind)
{
  SpectrumTrace trace{{}, p, kind};
  trace.points.reserve(omega_mods.size());
  for (std::size_t i = 0; i < omega_mods.size(); ++i) {
    if (i > 0 && !(omega_mods[i] > omega_mods[i - 1]))
      throw std::invalid_argument("omit_sweep: probe frequencies must be strictly increasing");
    const complex r = omit_probe_response(p, drive, omega_mods[i]);
    if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
      throw std::domain_error("omit_sweep: non-finite response");
    trace.points.push_back({omega_mods[i], r});
  }
  return trace;
}

struct DbaPoint {
  double delta = 0.0;
  double n_cav = 0.0;
  double gamma_opt = 0.0;
  double gamma_eff = 0.0;
};

/// Effective mechanical linewidth vs control detuning at fixed input power.
inline std::vector<DbaPoint> dba_sweep(const SystemParams& p, std::span<const double> deltas)
{
  std::vector<DbaPoint> out;
  out.reserve(deltas.size());
  SystemParams q = p;
  for (double d : deltas) {
    q.delta = d;
    const double n = cavity_photon_number(q);
    const double go = gamma_opt(q, n);
    out.push_back({d, n, go, p.gamma_m + go});
  }
  return out;
}

/// Per-mirror coupling fractions of the total cavity decay.
///
/// The excess intracavity loss is inferred from ηc = T_in/(T_in + T_out + L).
struct MirrorCoupling {
  double eta_in = 0.0;
  double eta_out = 0.0;
  double excess_loss = 0.0;
};

inline MirrorCoupling mirror_coupling(double eta_c, double t_in, double t_out)
{
  if (!(t_in > 0.0 && t_in < 1.0 && t_out > 0.0 && t_out < 1.0))
    throw std::invalid_argument("mirror_coupling: transmissions must lie in (0, 1)");
  const double total = t_in / eta_c;
  MirrorCoupling m{t_in / total, t_out / total, total - t_in - t_out};
  if (m.eta_in + m.eta_out > 1.0 || m.excess_loss < 0.0)
    throw std::invalid_argument("mirror_coupling: eta_in + eta_out exceeds 1");
  return m;
}

/// Pout/Pin at detuning `delta`: ηin ηout κ² / ((κ/2)² + Δ²).
inline double transmission_gain(const SystemParams& p, double t_in, double t_out, double delta)
{
  const MirrorCoupling m = mirror_coupling(p.eta_c, t_in, t_out);
  const double hk = p.kappa / 2.0;
  return m.eta_in * m.eta_out * p.kappa * p.kappa / (hk * hk + delta * delta);
}

inline double transmission_power(const SystemParams& p, double t_in, double t_out, double delta)
{
  return p.p_in * transmission_gain(p, t_in, t_out, delta);
}

inline constexpr double input_mirror_transmission = 280e-6;
inline constexpr double output_mirror_transmission = 10e-6;

} // namespace omem
