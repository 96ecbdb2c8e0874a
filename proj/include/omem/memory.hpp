#pragma once

// Write / dark-storage / read protocol of the mechanical memory.
//
// All envelopes live in the frame rotating at the signal frequency Ωsig, so
// the mechanical amplitude obeys
//
//   db/dt = -(Γeff/2 - iδ) b + sqrt(ηc Γopt) s_in(t)
//   s_out = s_in - i sqrt(ηc Γopt) b
//
// with δ = Ωsig - Ωm. The write input is the co-rotating half of the
// modulator sidebands, s_in(t) = (β s0/2) e^{Γsig t/2} on [-t_write, 0].
// Closed-form segments are exact; ode_oracle() integrates the same equation
// numerically from b = 0 and serves as the independent check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "omem/core.hpp"
#include "omem/numerics.hpp"

namespace omem {

inline constexpr double kWeakModulationLimit = 0.2;

/// Exponentially rising write signal.
struct SignalPulse {
  double beta = 0.0;
  double s0 = 0.0;        // carrier flux amplitude, sqrt(photons/s)
  double gamma_sig = 0.0; // rad/s
  double omega_sig = 0.0; // rad/s
  double delta = 0.0;     // two-photon detuning Ωsig - Ωm, rad/s
  double t_write = 0.0;   // s, truncation length of the rising exponential

  double amplitude() const noexcept { return beta * s0 / 2.0; }

  /// Rotating-frame input envelope; zero outside [-t_write, 0].
  complex envelope(double t) const noexcept
  {
    if (t > 0.0 || t < -t_write)
      return 0.0;
    return amplitude() * std::exp(gamma_sig * t / 2.0);
  }

  /// Input energy of the untruncated pulse, (β s0/2)²/Γsig.
  double input_energy() const noexcept { return amplitude() * amplitude() / gamma_sig; }

  /// Fraction of input_energy() contained in [-t_write, 0].
  double truncation_factor() const noexcept { return -std::expm1(-gamma_sig * t_write); }

  std::vector<std::string> warnings() const
  {
    std::vector<std::string> out;
    if (beta >= kWeakModulationLimit)
      out.emplace_back("modulation depth beta >= 0.2 violates the weak-modulation assumption");
    if (t_write < 5.0 / gamma_sig)
      out.emplace_back("t_write < 5/gamma_sig: truncated write pulse (energy corrected analytically)");
    return out;
  }
};

inline SignalPulse make_signal(double beta, double s0, double gamma_sig, double omega_sig, double omega_m,
                               double t_write)
{
  if (!all_finite({beta, s0, gamma_sig, omega_sig, omega_m, t_write}))
    throw std::invalid_argument("make_signal: non-finite input");
  if (gamma_sig <= 0.0)
    throw std::invalid_argument("make_signal: gamma_sig must be > 0");
  if (beta < 0.0 || s0 < 0.0)
    throw std::invalid_argument("make_signal: beta and s0 must be >= 0");
  if (t_write < 0.0)
    throw std::invalid_argument("make_signal: t_write must be >= 0");
  return SignalPulse{beta, s0, gamma_sig, omega_sig, omega_sig - omega_m, t_write};
}

/// Exact solution of the write equation for the exponential input.
struct WriteSolution {
  complex drive_gain;   // K = sqrt(ηc Γopt)(β s0/2) / ((Γeff+Γsig)/2 - iδ)
  complex decay;        // (Γeff/2 - iδ)
  double gamma_sig = 0.0;
  double t_write = 0.0;

  /// b(t) for an input that has been on forever, K e^{Γsig t/2}.
  complex steady(double t) const { return drive_gain * std::exp(gamma_sig * t / 2.0); }

  /// b(t) on [-t_write, 0] starting from b(-t_write) = 0.
  complex truncated(double t) const
  {
    const double tau = t + t_write;
    return drive_gain * (std::exp(gamma_sig * t / 2.0) -
                         std::exp(-gamma_sig * t_write / 2.0) * std::exp(-decay * tau));
  }

  /// b(0) for the untruncated pulse.
  complex b0() const { return drive_gain; }

  /// |b_truncated(0)|² / |b0|².
  double truncation_factor() const
  {
    return std::norm(1.0 - std::exp(-(complex(gamma_sig / 2.0, 0.0) + decay) * t_write));
  }
};

inline WriteSolution evolve_write(const SignalPulse& pulse, double gamma_eff, double gamma_opt, double eta_c)
{
  if (gamma_opt > gamma_eff)
    throw std::invalid_argument("evolve_write: gamma_opt must not exceed gamma_eff");
  if (gamma_opt < 0.0)
    throw std::invalid_argument("evolve_write: gamma_opt must be >= 0 (red-detuned control)");
  const complex decay(gamma_eff / 2.0, -pulse.delta);
  const complex denom((gamma_eff + pulse.gamma_sig) / 2.0, -pulse.delta);
  const complex gain = std::sqrt(eta_c * gamma_opt) * pulse.amplitude() / denom;
  return WriteSolution{gain, decay, pulse.gamma_sig, pulse.t_write};
}

/// Dark storage: amplitude decays at 1/(2 t1), phase advances at frame_delta.
inline complex evolve_delay(complex b_start, double t_delay, double t1, double frame_delta)
{
  if (t_delay < 0.0)
    throw std::invalid_argument("evolve_delay: t_delay must be >= 0");
  const double decay = std::isinf(t1) ? 0.0 : t_delay / (2.0 * t1);
  return b_start * std::exp(complex(-decay, frame_delta * t_delay));
}

struct ReadOut {
  std::vector<double> t; // time since read start
  std::vector<complex> b;
  std::vector<complex> s_out;
  double energy = 0.0;            // retrieved energy within t_read
  double truncation_factor = 1.0; // 1 - e^{-Γeff t_read}
  std::vector<std::string> warnings;
};

/// Number of uniform intervals covering `duration` with steps no longer than `max_step`.
inline std::size_t interval_count(double duration, double max_step)
{
  if (duration <= 0.0)
    return 0;
  return static_cast<std::size_t>(std::ceil(duration / max_step * (1.0 - 1e-12)));
}

/// Read-out with the control back on and no signal input.
inline ReadOut evolve_read(complex b_start, double gamma_eff_read, double gamma_opt_read, double eta_c,
                           double t_read, double sample_dt, double delta = 0.0)
{
  if (!(gamma_eff_read > 0.0))
    throw std::invalid_argument("evolve_read: gamma_eff_read must be > 0");
  if (gamma_opt_read < 0.0 || gamma_opt_read > gamma_eff_read)
    throw std::invalid_argument("evolve_read: need 0 <= gamma_opt_read <= gamma_eff_read");
  if (!(sample_dt > 0.0) || t_read < 0.0)
    throw std::invalid_argument("evolve_read: need sample_dt > 0 and t_read >= 0");

  ReadOut out;
  const std::size_t n = interval_count(t_read, sample_dt);
  const double h = n > 0 ? t_read / static_cast<double>(n) : 0.0;
  const complex coupling(0.0, -std::sqrt(eta_c * gamma_opt_read));
  const complex rate(-gamma_eff_read / 2.0, delta);
  out.t.reserve(n + 1);
  out.b.reserve(n + 1);
  out.s_out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = h * static_cast<double>(k);
    const complex b = b_start * std::exp(rate * t);
    out.t.push_back(t);
    out.b.push_back(b);
    out.s_out.push_back(coupling * b);
  }
  out.truncation_factor = -std::expm1(-gamma_eff_read * t_read);
  out.energy = eta_c * gamma_opt_read * std::norm(b_start) / gamma_eff_read * out.truncation_factor;
  if (t_read < 5.0 / gamma_eff_read)
    out.warnings.push_back("t_read < 5/gamma_eff: retrieval truncated, unretrieved fraction " +
                           std::to_string(std::exp(-gamma_eff_read * t_read)));
  return out;
}

/// Durations and rates for one write/delay/read cycle.
struct ProtocolTimeline {
  double t_write = 0.0;
  double t_delay = 0.0;
  double t_read = 0.0;
  double gamma_eff_write = 0.0;
  double gamma_eff_read = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  double sample_dt = 0.0;
  std::optional<double> frame_delta; // storage phase rate; δ when unset

  double fastest_rate(const SignalPulse& pulse) const
  {
    return std::max({gamma_eff_write, gamma_eff_read, pulse.gamma_sig, std::abs(pulse.delta)});
  }
};

/// Timeline with the read and write control at the same power as `drive`.
///
/// t_write = 10/Γsig, t_read = 10/Γeff, sample_dt = 0.01/(fastest rate).
inline ProtocolTimeline make_timeline(const SystemParams& params, const DriveState& drive,
                                      const SignalPulse& pulse, double t_delay)
{
  ProtocolTimeline tl;
  tl.t_write = pulse.t_write;
  tl.t_delay = t_delay;
  tl.gamma_eff_write = drive.gamma_eff;
  tl.gamma_eff_read = drive.gamma_eff;
  tl.t_read = 10.0 / drive.gamma_eff;
  tl.t1 = params.storage_t1();
  tl.sample_dt = 0.01 / tl.fastest_rate(pulse);
  return tl;
}

enum class Segment { write, delay, read };

inline const char* segment_name(Segment s) noexcept
{
  switch (s) {
  case Segment::write:
    return "write";
  case Segment::delay:
    return "delay";
  case Segment::read:
    return "read";
  }
  return "unknown";
}

struct TracePoint {
  double t = 0.0;
  complex s_in;
  complex b;
  complex s_out;
  Segment segment = Segment::write;
};

/// Sampled envelopes of one protocol run.
///
/// Segments are stored contiguously; each includes both of its end points,
/// so boundary times appear twice with identical b.
struct ProtocolTrace {
  std::vector<TracePoint> points;
  SignalPulse pulse;
  ProtocolTimeline timeline;
  double eta_c = 1.0;
  double gamma_opt_write = 0.0;
  double gamma_opt_read = 0.0;
  std::vector<std::string> warnings;

  std::span<const TracePoint> segment(Segment s) const
  {
    auto first = std::find_if(points.begin(), points.end(), [s](const TracePoint& p) { return p.segment == s; });
    auto last = std::find_if(first, points.end(), [s](const TracePoint& p) { return p.segment != s; });
    return {first, last};
  }

  /// Peak retrieved amplitude relative to the input amplitude at t = 0⁻.
  double retrieved_amplitude_ratio() const
  {
    double peak = 0.0;
    for (const TracePoint& p : segment(Segment::read))
      peak = std::max(peak, std::abs(p.s_out));
    return pulse.amplitude() > 0.0 ? peak / pulse.amplitude() : 0.0;
  }
};

namespace detail {

struct SegmentGrid {
  double start = 0.0;
  double step = 0.0;
  std::size_t intervals = 0;
  double at(std::size_t k) const { return start + step * static_cast<double>(k); }
};

inline SegmentGrid make_grid(double start, double duration, double max_step)
{
  const std::size_t n = interval_count(duration, max_step);
  return {start, n > 0 ? duration / static_cast<double>(n) : 0.0, n};
}

struct ResolvedRates {
  double gamma_opt_write = 0.0;
  double gamma_opt_read = 0.0;
  double frame_delta = 0.0;
};

inline ResolvedRates resolve_rates(const SystemParams& params, const DriveState& drive,
                                   const SignalPulse& pulse, const ProtocolTimeline& tl)
{
  if (tl.t_write < 0.0 || tl.t_delay < 0.0 || tl.t_read < 0.0)
    throw std::invalid_argument("ProtocolTimeline: durations must be >= 0");
  if (!(tl.sample_dt > 0.0))
    throw std::invalid_argument("ProtocolTimeline: sample_dt must be > 0");
  if (!(tl.gamma_eff_write > 0.0) || !(tl.gamma_eff_read > 0.0))
    throw std::invalid_argument("ProtocolTimeline: effective linewidths must be > 0");
  if (std::abs(pulse.t_write - tl.t_write) > 1e-12 * std::max(1.0, tl.t_write))
    throw std::invalid_argument("ProtocolTimeline: t_write disagrees with the signal pulse");
  if (std::abs(tl.gamma_eff_write - drive.gamma_eff) > 1e-9 * drive.gamma_eff)
    throw std::invalid_argument("ProtocolTimeline: gamma_eff_write disagrees with the drive state");
  const double max_rate = std::max(tl.gamma_eff_write, std::max(tl.gamma_eff_read, pulse.gamma_sig));
  if (tl.sample_dt > 0.05 / max_rate)
    throw std::invalid_argument("ProtocolTimeline: sample_dt must be <= 0.05/max(gamma_eff, gamma_sig)");
  ResolvedRates r;
  r.gamma_opt_write = tl.gamma_eff_write - params.gamma_m;
  r.gamma_opt_read = tl.gamma_eff_read - params.gamma_m;
  if (r.gamma_opt_write < 0.0 || r.gamma_opt_read < 0.0)
    throw std::invalid_argument("ProtocolTimeline: effective linewidth below intrinsic gamma_m");
  r.frame_delta = tl.frame_delta.value_or(pulse.delta);
  return r;
}

inline std::vector<std::string> collect_warnings(const SystemParams& params, const SignalPulse& pulse,
                                                 const ProtocolTimeline& tl)
{
  std::vector<std::string> out = params.warnings();
  for (auto& w : pulse.warnings())
    out.push_back(std::move(w));
  if (tl.t_read < 5.0 / tl.gamma_eff_read)
    out.push_back("t_read < 5/gamma_eff: retrieval truncated, unretrieved fraction " +
                  std::to_string(std::exp(-tl.gamma_eff_read * tl.t_read)));
  return out;
}

} // namespace detail

/// Concatenates the exact write, delay and read segments on the sample grid.
inline ProtocolTrace closed_form_protocol(const SystemParams& params, const DriveState& drive,
                                          const SignalPulse& pulse, const ProtocolTimeline& tl)
{
  const detail::ResolvedRates rates = detail::resolve_rates(params, drive, pulse, tl);
  ProtocolTrace trace;
  trace.pulse = pulse;
  trace.timeline = tl;
  trace.eta_c = params.eta_c;
  trace.gamma_opt_write = rates.gamma_opt_write;
  trace.gamma_opt_read = rates.gamma_opt_read;
  trace.warnings = detail::collect_warnings(params, pulse, tl);

  const WriteSolution write = evolve_write(pulse, tl.gamma_eff_write, rates.gamma_opt_write, params.eta_c);
  const complex write_coupling(0.0, -std::sqrt(params.eta_c * rates.gamma_opt_write));
  const auto wg = detail::make_grid(-tl.t_write, tl.t_write, tl.sample_dt);
  for (std::size_t k = 0; k <= wg.intervals; ++k) {
    const double t = k == wg.intervals ? 0.0 : wg.at(k);
    const complex s_in = pulse.envelope(t);
    const complex b = write.truncated(t);
    trace.points.push_back({t, s_in, b, s_in + write_coupling * b, Segment::write});
  }

  const complex b_stored = trace.points.back().b;
  const auto dg = detail::make_grid(0.0, tl.t_delay, tl.sample_dt);
  for (std::size_t k = 0; k <= dg.intervals; ++k) {
    const double t = k == dg.intervals ? tl.t_delay : dg.at(k);
    trace.points.push_back({t, 0.0, evolve_delay(b_stored, t, tl.t1, rates.frame_delta), 0.0, Segment::delay});
  }

  const complex b_read = trace.points.back().b;
  const ReadOut read = evolve_read(b_read, tl.gamma_eff_read, rates.gamma_opt_read, params.eta_c, tl.t_read,
                                   tl.sample_dt, pulse.delta);
  for (std::size_t k = 0; k < read.t.size(); ++k)
    trace.points.push_back({tl.t_delay + read.t[k], 0.0, read.b[k], read.s_out[k], Segment::read});
  return trace;
}

struct OracleOptions {
  /// Re-include the counter-rotating modulator sideband -(β s0/2) e^{2iΩsig t}.
  /// Requires sample_dt to resolve 2Ωsig.
  bool counter_rotating = false;
};

/// Fixed-step RK4 integration of the memory equation, starting from b = 0.
inline ProtocolTrace ode_oracle(const SystemParams& params, const DriveState& drive, const SignalPulse& pulse,
                                const ProtocolTimeline& tl, const OracleOptions& options = {})
{
  const detail::ResolvedRates rates = detail::resolve_rates(params, drive, pulse, tl);
  double fastest = std::max({tl.fastest_rate(pulse), std::abs(rates.frame_delta),
                             std::isinf(tl.t1) ? 0.0 : 1.0 / tl.t1});
  if (options.counter_rotating)
    fastest = std::max(fastest, 2.0 * std::abs(pulse.omega_sig));
  if (tl.sample_dt > 0.05 / fastest)
    throw std::invalid_argument("ode_oracle: sample_dt too coarse for the fastest rate (need <= 0.05/rate)");

  ProtocolTrace trace;
  trace.pulse = pulse;
  trace.timeline = tl;
  trace.eta_c = params.eta_c;
  trace.gamma_opt_write = rates.gamma_opt_write;
  trace.gamma_opt_read = rates.gamma_opt_read;
  trace.warnings = detail::collect_warnings(params, pulse, tl);

  const double write_coupling = std::sqrt(params.eta_c * rates.gamma_opt_write);
  const complex write_rate(-tl.gamma_eff_write / 2.0, pulse.delta);
  auto input = [&](double t) -> complex {
    // Smooth continuation past the window edges keeps RK4 sub-steps consistent.
    complex s = pulse.amplitude() * std::exp(pulse.gamma_sig * t / 2.0);
    if (options.counter_rotating)
      s -= pulse.amplitude() * std::exp(complex(pulse.gamma_sig * t / 2.0, 2.0 * pulse.omega_sig * t));
    return s;
  };
  auto write_rhs = [&](double t, complex b) { return write_rate * b + write_coupling * input(t); };

  complex b = 0.0;
  const auto wg = detail::make_grid(-tl.t_write, tl.t_write, tl.sample_dt);
  const complex out_coupling(0.0, -write_coupling);
  for (std::size_t k = 0; k <= wg.intervals; ++k) {
    const double t = k == wg.intervals ? 0.0 : wg.at(k);
    if (k > 0)
      b = rk4_step(b, wg.at(k - 1), wg.step, write_rhs);
    const complex s_in = pulse.envelope(t);
    trace.points.push_back({t, s_in, b, s_in + out_coupling * b, Segment::write});
  }

  const double storage_decay = std::isinf(tl.t1) ? 0.0 : 1.0 / (2.0 * tl.t1);
  const complex delay_rate(-storage_decay, rates.frame_delta);
  auto delay_rhs = [&](double, complex y) { return delay_rate * y; };
  const auto dg = detail::make_grid(0.0, tl.t_delay, tl.sample_dt);
  for (std::size_t k = 0; k <= dg.intervals; ++k) {
    if (k > 0)
      b = rk4_step(b, dg.at(k - 1), dg.step, delay_rhs);
    const double t = k == dg.intervals ? tl.t_delay : dg.at(k);
    trace.points.push_back({t, 0.0, b, 0.0, Segment::delay});
  }

  const complex read_rate(-tl.gamma_eff_read / 2.0, pulse.delta);
  const complex read_coupling(0.0, -std::sqrt(params.eta_c * rates.gamma_opt_read));
  auto read_rhs = [&](double, complex y) { return read_rate * y; };
  const auto rg = detail::make_grid(tl.t_delay, tl.t_read, tl.sample_dt);
  for (std::size_t k = 0; k <= rg.intervals; ++k) {
    if (k > 0)
      b = rk4_step(b, rg.at(k - 1), rg.step, read_rhs);
    const double t = k == rg.intervals ? tl.t_delay + tl.t_read : rg.at(k);
    trace.points.push_back({t, 0.0, b, read_coupling * b, Segment::read});
  }
  return trace;
}

struct ProtocolResult {
  ProtocolTrace closed_form;
  std::optional<ProtocolTrace> oracle;
  /// max |b_oracle - b_closed| / max |b_closed| over the trace.
  double oracle_deviation = 0.0;
};

inline double max_relative_deviation(const ProtocolTrace& reference, const ProtocolTrace& other)
{
  if (reference.points.size() != other.points.size())
    throw std::invalid_argument("max_relative_deviation: traces sampled on different grids");
  double scale = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < reference.points.size(); ++i) {
    scale = std::max(scale, std::abs(reference.points[i].b));
    worst = std::max(worst, std::abs(reference.points[i].b - other.points[i].b));
  }
  return scale > 0.0 ? worst / scale : worst;
}

/// Runs the closed-form protocol and, unless disabled, the ODE oracle beside it.
inline ProtocolResult simulate_protocol(const SystemParams& params, const DriveState& drive,
                                        const SignalPulse& pulse, const ProtocolTimeline& tl,
                                        bool with_oracle = true)
{
  ProtocolResult result{closed_form_protocol(params, drive, pulse, tl), std::nullopt, 0.0};
  if (with_oracle) {
    result.oracle = ode_oracle(params, drive, pulse, tl);
    result.oracle_deviation = max_relative_deviation(result.closed_form, *result.oracle);
  }
  return result;
}

/// Efficiencies from a sampled trace, with analytic truncation corrections.
struct EfficiencyReport {
  double eta_int = 0.0;
  double eta = 0.0;
  double eta_detected = 0.0;
  double energy_in = 0.0;  // untruncated input energy
  double energy_out = 0.0; // untruncated retrieved energy
  double input_truncation = 1.0;
  double write_truncation = 1.0;
  double read_truncation = 1.0;
};

inline EfficiencyReport efficiency(const ProtocolTrace& trace, const SystemParams& params)
{
  const auto write = trace.segment(Segment::write);
  const auto read = trace.segment(Segment::read);
  auto integrate = [](std::span<const TracePoint> seg, auto field) {
    if (seg.size() < 2)
      return 0.0;
    std::vector<double> y;
    y.reserve(seg.size());
    for (const TracePoint& p : seg)
      y.push_back(std::norm(field(p)));
    const double h = (seg.back().t - seg.front().t) / static_cast<double>(seg.size() - 1);
    return simpson(y, h);
  };

  EfficiencyReport r;
  r.input_truncation = trace.pulse.truncation_factor();
  const double e_in = integrate(write, [](const TracePoint& p) { return p.s_in; });
  if (!(e_in > 0.0))
    throw std::invalid_argument("efficiency: trace has zero input energy");
  r.energy_in = e_in / r.input_truncation;

  const auto& tl = trace.timeline;
  r.write_truncation =
      evolve_write(trace.pulse, tl.gamma_eff_write, trace.gamma_opt_write, trace.eta_c).truncation_factor();
  r.read_truncation = -std::expm1(-tl.gamma_eff_read * tl.t_read);
  const double e_out = integrate(read, [](const TracePoint& p) { return p.s_out; });
  r.energy_out = r.read_truncation > 0.0 ? e_out / (r.read_truncation * r.write_truncation) : 0.0;

  r.eta = r.energy_out / r.energy_in;
  r.eta_int = r.eta / (params.eta_c * params.eta_c);
  r.eta_detected = r.eta * params.eta_loss * params.eta_qe;
  return r;
}

/// Bandwidth-matching internal efficiency 4 Γsig Γeff / (Γsig + Γeff)².
inline double bandwidth_efficiency(double gamma_sig, double gamma_eff)
{
  const double s = gamma_sig + gamma_eff;
  return 4.0 * gamma_sig * gamma_eff / (s * s);
}

/// Memory efficiency η = E_out/E_in for the untruncated protocol:
///
///   ηc² (Γopt/Γeff)² Γsig Γeff / [((Γsig+Γeff)/2)² + δ²] e^{-t_delay/t1}
///
/// with Γopt = Γeff - gamma_m. At gamma_m = 0 this is the bandwidth law at
/// δ = 0 and the Lorentzian detuning law at Γsig = Γeff.
inline double closed_form_efficiency(double gamma_sig, double gamma_eff, double delta, double t_delay, double t1,
                                     double eta_c, double gamma_m = 0.0)
{
  if (!(gamma_sig > 0.0 && gamma_eff > 0.0))
    throw std::invalid_argument("closed_form_efficiency: rates must be > 0");
  const double half = (gamma_sig + gamma_eff) / 2.0;
  const double opt_fraction = (gamma_eff - gamma_m) / gamma_eff;
  const double storage = std::isinf(t1) ? 1.0 : std::exp(-t_delay / t1);
  return eta_c * eta_c * opt_fraction * opt_fraction * gamma_sig * gamma_eff / (half * half + delta * delta) *
         storage;
}

} // namespace omem
