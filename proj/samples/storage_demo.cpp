// Store a matched pulse for 4.4 ms with the default device and print the
// efficiency budget next to the analytic value.

#include <cstdio>

#include "omem/core.hpp"
#include "omem/memory.hpp"

int main()
{
  using namespace omem;

  const SystemParams p = reference_device();
  const DriveState drive = drive_state(p);
  std::printf("n_cav %.4g  g/2pi %.4g Hz  Gamma_eff/2pi %.4g Hz  C %.4g\n", drive.n_cav, angular_to_hz(drive.g),
              angular_to_hz(drive.gamma_eff), drive.cooperativity.value_or(0.0));

  const SignalPulse pulse = make_signal(0.05, 1e4, drive.gamma_eff, p.omega_m, p.omega_m, 10.0 / drive.gamma_eff);
  const ProtocolTimeline tl = make_timeline(p, drive, pulse, 4.4e-3);
  const ProtocolResult run = simulate_protocol(p, drive, pulse, tl);
  const EfficiencyReport eff = efficiency(run.closed_form, p);

  std::printf("eta_int %.6f  eta %.6f  eta_detected %.6f\n", eff.eta_int, eff.eta, eff.eta_detected);
  std::printf("closed form %.6f  oracle deviation %.2e\n",
              closed_form_efficiency(pulse.gamma_sig, drive.gamma_eff, 0.0, tl.t_delay, tl.t1, p.eta_c, p.gamma_m),
              run.oracle_deviation);
  for (const auto& w : run.closed_form.warnings)
    std::printf("warning: %s\n", w.c_str());
}
