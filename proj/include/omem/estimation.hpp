#pragma once

// Calibration fits: cavity linewidth and detuning from broad OMIT sweeps,
// input power from transmitted power, g0 from dynamical backaction, Q from
// ringdown, T1 from storage decay and the two efficiency scans.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "omem/core.hpp"
#include "omem/dataset.hpp"
#include "omem/least_squares.hpp"
#include "omem/memory.hpp"
#include "omem/response.hpp"

namespace omem {

namespace detail {

inline void require_kind(const Dataset& data, std::initializer_list<DatasetKind> kinds, const char* who)
{
  data.validate();
  if (std::find(kinds.begin(), kinds.end(), data.kind) == kinds.end())
    throw std::invalid_argument(std::string(who) + ": wrong dataset kind " + std::string(kind_name(data.kind)));
  if (data.size() == 0)
    throw std::invalid_argument(std::string(who) + ": empty dataset");
}

/// Interpolated abscissae where y crosses `level` on each side of `peak`.
inline std::pair<std::optional<double>, std::optional<double>> level_crossings(const std::vector<double>& x,
                                                                                const std::vector<double>& y,
                                                                                std::size_t peak, double level)
{
  auto interp = [&](std::size_t a, std::size_t b) {
    const double t = (level - y[a]) / (y[b] - y[a]);
    return x[a] + t * (x[b] - x[a]);
  };
  const bool above = y[peak] > level;
  auto crossed = [&](std::size_t i) { return above ? y[i] <= level : y[i] >= level; };
  std::optional<double> left, right;
  for (std::size_t i = peak; i-- > 0;)
    if (crossed(i)) {
      left = interp(i, i + 1);
      break;
    }
  for (std::size_t i = peak + 1; i < y.size(); ++i)
    if (crossed(i)) {
      right = interp(i - 1, i);
      break;
    }
  return {left, right};
}

/// One-parameter weighted linear fit y ≈ c·m; returns (c, rss, std_error).
struct LinearScale {
  double value = 0.0;
  double rss = 0.0;
  std::optional<double> std_error;
};

inline LinearScale fit_linear_scale(const Dataset& data, const std::vector<double>& basis,
                                    const std::vector<double>& y)
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    num += data.w(i) * y[i] * basis[i];
    den += data.w(i) * basis[i] * basis[i];
  }
  if (!(den > 0.0))
    throw std::invalid_argument("linear fit: model basis vanishes on every sample");
  LinearScale s;
  s.value = num / den;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double r = y[i] - s.value * basis[i];
    s.rss += data.w(i) * r * r;
  }
  if (basis.size() > 1)
    s.std_error = std::sqrt(s.rss / static_cast<double>(basis.size() - 1) / den);
  return s;
}

inline FitResult closed_form_result(std::vector<FitParameter> params, double rss)
{
  FitResult r;
  r.parameters = std::move(params);
  r.rss = rss;
  r.converged = true;
  r.cost_history = {rss};
  return r;
}

} // namespace detail

/// Optional starting point for fit_cavity; heuristics fill anything unset.
struct CavityGuess {
  std::optional<double> delta, kappa, amplitude, offset;
};

/// Bare-cavity fit of a broad OMIT sweep: Δ, κ, amplitude and offset.
///
/// Model: amplitude·|r|^k + offset with r the g = 0 reflection at fixed ηc and
/// k = 2 or 1 per the dataset target. Flags "under_constrained" when the
/// sweep spans less than 2κ.
inline FitResult fit_cavity(const Dataset& data, double eta_c, const CavityGuess& guess = {},
                            const LeastSquaresOptions& opt = {})
{
  detail::require_kind(data, {DatasetKind::omit_broad, DatasetKind::omit_narrow}, "fit_cavity");
  if (data.size() < 4)
    throw std::invalid_argument("fit_cavity: need at least 4 samples");
  const bool squared = data.target == ResponseTarget::abs2;

  const auto min_it = std::min_element(data.y.begin(), data.y.end());
  const auto imin = static_cast<std::size_t>(min_it - data.y.begin());
  const double baseline = *std::max_element(data.y.begin(), data.y.end());
  const double depth = baseline - *min_it;
  const double span = data.x.back() - data.x.front();
  const auto [left, right] = detail::level_crossings(data.x, data.y, imin, *min_it + depth / 2.0);
  double kappa0 = span / 2.0;
  if (left && right)
    kappa0 = *right - *left;
  else if (left || right)
    kappa0 = 2.0 * std::abs(data.x[imin] - (left ? *left : *right));
  const double contrast = squared ? 4.0 * eta_c * (1.0 - eta_c) : 1.0 - std::abs(1.0 - 2.0 * eta_c);
  const double amp0 = contrast > 0.0 && depth > 0.0 ? depth / contrast : 1.0;

  const double kappa_init = guess.kappa.value_or(std::max(kappa0, 1e-12 * std::abs(span)));
  const double amp_init = guess.amplitude.value_or(amp0);
  std::vector<ParameterSpec> specs{
      {"delta", Unit::angular, guess.delta.value_or(-data.x[imin]), -std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity(), kappa_init},
      {"kappa", Unit::angular, kappa_init, 0.0, std::numeric_limits<double>::infinity(), kappa_init},
      {"amplitude", Unit::dimensionless, amp_init, -std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity(), std::abs(amp_init)},
      {"offset", Unit::dimensionless, guess.offset.value_or(baseline - amp_init),
       -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), std::abs(amp_init)},
  };
  specs[1].lower = 1e-9 * kappa_init;

  auto model = [&](const std::vector<double>& p) {
    SystemParams sp;
    sp.delta = p[0];
    sp.kappa = p[1];
    sp.eta_c = eta_c;
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double mag2 = std::norm(bare_cavity_response(sp, data.x[i]));
      out[i] = p[2] * (squared ? mag2 : std::sqrt(mag2)) + p[3];
    }
    return out;
  };
  FitResult result = least_squares(model, data, specs, opt);
  if (span < 2.0 * result.value("kappa"))
    result.flags.emplace_back("under_constrained");
  return result;
}

/// Input power from transmitted DC power vs detuning at known κ and mirrors.
inline FitResult fit_input_power(const Dataset& data, const SystemParams& params,
                                 double t_in = input_mirror_transmission,
                                 double t_out = output_mirror_transmission)
{
  detail::require_kind(data, {DatasetKind::transmission}, "fit_input_power");
  std::vector<double> basis(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    basis[i] = transmission_gain(params, t_in, t_out, data.x[i]);
  const auto s = detail::fit_linear_scale(data, basis, data.y);
  return detail::closed_form_result({{"p_in", Unit::watts, s.value, s.std_error}}, s.rss);
}

/// g0 from Γeff(Δ) with Pin, ηc, κ and Ωm fixed.
///
/// Γeff - Γm is proportional to g0², so g0² follows from one linear normal
/// equation. Γm is held at `gamma_m` (0 by default).
inline FitResult fit_g0(const Dataset& data, const SystemParams& params, double gamma_m = 0.0)
{
  detail::require_kind(data, {DatasetKind::dba}, "fit_g0");
  SystemParams unit = params;
  unit.g0 = 1.0;
  std::vector<double> basis(data.size()), excess(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    unit.delta = data.x[i];
    basis[i] = gamma_opt(unit, cavity_photon_number(unit));
    excess[i] = data.y[i] - gamma_m;
  }
  const auto s = detail::fit_linear_scale(data, basis, excess);
  if (!(s.value > 0.0)) {
    FitResult failed = detail::closed_form_result({{"g0", Unit::angular, 0.0, std::nullopt}}, s.rss);
    failed.converged = false;
    failed.flags.emplace_back("negative_g0_squared");
    return failed;
  }
  const double g0 = std::sqrt(s.value);
  std::optional<double> se;
  if (s.std_error)
    se = *s.std_error / (2.0 * g0);
  return detail::closed_form_result({{"g0", Unit::angular, g0, se}}, s.rss);
}

/// Log-linear regression of a ringdown amplitude, A(t) = A0 e^{-Γm t/2}.
///
/// Derived: Q = Ωm/Γm (infinite for a non-decaying trace) and the amplitude
/// 1/e time 2/Γm.
inline FitResult fit_ringdown(const Dataset& data, double omega_m)
{
  detail::require_kind(data, {DatasetKind::ringdown}, "fit_ringdown");
  if (data.size() < 2)
    throw std::invalid_argument("fit_ringdown: need at least 2 samples");
  std::vector<double> log_a(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data.y[i] > 0.0))
      throw std::invalid_argument("fit_ringdown: amplitudes must be > 0");
    log_a[i] = std::log(data.y[i]);
  }
  double sw = 0.0, st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sw += data.w(i);
    st += data.w(i) * data.x[i];
    sy += data.w(i) * log_a[i];
  }
  const double tm = st / sw, ym = sy / sw;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    stt += data.w(i) * (data.x[i] - tm) * (data.x[i] - tm);
    sty += data.w(i) * (data.x[i] - tm) * (log_a[i] - ym);
  }
  if (!(stt > 0.0))
    throw std::invalid_argument("fit_ringdown: samples need distinct times");
  const double slope = sty / stt;
  const double intercept = ym - slope * tm;
  double rss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = log_a[i] - intercept - slope * data.x[i];
    rss += data.w(i) * r * r;
  }
  std::optional<double> slope_se;
  if (data.size() > 2)
    slope_se = std::sqrt(rss / static_cast<double>(data.size() - 2) / stt);

  FitResult result;
  double gamma_m = -2.0 * slope;
  if (gamma_m < 0.0) {
    result.flags.emplace_back("growing_amplitude");
    gamma_m = 0.0;
  }
  const double inf = std::numeric_limits<double>::infinity();
  result.parameters = {
      {"gamma_m", Unit::angular, gamma_m, slope_se ? std::optional<double>(2.0 * *slope_se) : std::nullopt},
      {"amplitude0", Unit::dimensionless, std::exp(intercept), std::nullopt},
  };
  result.derived = {
      {"q", Unit::dimensionless, gamma_m > 0.0 ? omega_m / gamma_m : inf, std::nullopt},
      {"t1_equivalent", Unit::seconds, gamma_m > 0.0 ? 2.0 / gamma_m : inf, std::nullopt},
      {"energy_decay_time", Unit::seconds, gamma_m > 0.0 ? 1.0 / gamma_m : inf, std::nullopt},
  };
  result.rss = rss;
  result.converged = true;
  result.cost_history = {rss};
  return result;
}

inline constexpr double kNoiseFloorFactor = 3.0;

/// Storage lifetime from retrieved amplitude vs delay, A0 e^{-t/(2 T1)}.
///
/// Points at or below kNoiseFloorFactor × `noise_floor` are excluded; their
/// count is reported as the derived value "excluded_points".
inline FitResult fit_T1(const Dataset& data, double noise_floor = 0.0, const LeastSquaresOptions& opt = {})
{
  detail::require_kind(data, {DatasetKind::decay_T1}, "fit_T1");
  Dataset kept{DatasetKind::decay_T1, {}, {}, {}, data.target};
  const double threshold = kNoiseFloorFactor * noise_floor;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.y[i] > threshold && data.y[i] > 0.0) {
      kept.x.push_back(data.x[i]);
      kept.y.push_back(data.y[i]);
      if (!data.weight.empty())
        kept.weight.push_back(data.weight[i]);
    } else {
      ++excluded;
    }
  }
  if (kept.size() < 2)
    throw std::invalid_argument("fit_T1: fewer than 2 points above the noise floor");

  Dataset as_ringdown = kept;
  as_ringdown.kind = DatasetKind::ringdown;
  const FitResult seed = fit_ringdown(as_ringdown, 1.0);
  const double rate = seed.value("gamma_m"); // = 1/T1 for amplitudes decaying as e^{-t/2T1}
  const double t_span = kept.x.back() - kept.x.front();
  const double t1_init = rate > 0.0 ? 1.0 / rate : 1e3 * std::max(t_span, 1.0);

  std::vector<ParameterSpec> specs{
      {"amplitude0", Unit::dimensionless, seed.value("amplitude0"), 0.0, std::numeric_limits<double>::infinity(),
       seed.value("amplitude0")},
      {"t1", Unit::seconds, t1_init, 1e-9 * t1_init, std::numeric_limits<double>::infinity(), t1_init},
  };
  auto model = [&](const std::vector<double>& p) {
    std::vector<double> out(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      out[i] = p[0] * std::exp(-kept.x[i] / (2.0 * p[1]));
    return out;
  };
  FitResult result = least_squares(model, kept, specs, opt);
  result.derived.push_back({"excluded_points", Unit::dimensionless, static_cast<double>(excluded), std::nullopt});
  if (excluded > 0)
    result.flags.emplace_back("noise_floor_exclusions");
  return result;
}

/// Multiplicative constant of the bandwidth-matching law at fixed Γeff.
inline FitResult fit_eff_bandwidth(const Dataset& data, double gamma_eff, std::optional<double> eta_c = {})
{
  detail::require_kind(data, {DatasetKind::eff_bandwidth}, "fit_eff_bandwidth");
  std::vector<double> basis(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    basis[i] = bandwidth_efficiency(data.x[i], gamma_eff);
  const auto s = detail::fit_linear_scale(data, basis, data.y);
  FitResult result = detail::closed_form_result({{"scale", Unit::dimensionless, s.value, s.std_error}}, s.rss);
  if (eta_c)
    result.derived.push_back({"scale_over_eta_c2", Unit::dimensionless, s.value / (*eta_c * *eta_c), std::nullopt});
  return result;
}

/// Storage conditions used to compare a detuning-scan peak with its bound.
struct StorageBound {
  double eta_c = 1.0;
  double t_delay = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  double value() const { return eta_c * eta_c * (std::isinf(t1) ? 1.0 : std::exp(-t_delay / t1)); }
};

/// Lorentzian fit peak·Γ²/((δ - center)² + Γ²) of efficiency vs two-photon detuning.
inline FitResult fit_eff_detuning(const Dataset& data, std::optional<StorageBound> bound = {},
                                  const LeastSquaresOptions& opt = {})
{
  detail::require_kind(data, {DatasetKind::eff_detuning}, "fit_eff_detuning");
  if (data.size() < 4)
    throw std::invalid_argument("fit_eff_detuning: need at least 4 samples");
  const auto max_it = std::max_element(data.y.begin(), data.y.end());
  const auto imax = static_cast<std::size_t>(max_it - data.y.begin());
  const double peak0 = *max_it;
  const auto [left, right] = detail::level_crossings(data.x, data.y, imax, peak0 / 2.0);
  double width0 = (data.x.back() - data.x.front()) / 4.0;
  if (left && right)
    width0 = (*right - *left) / 2.0;
  else if (left || right)
    width0 = std::abs(data.x[imax] - (left ? *left : *right));

  std::vector<ParameterSpec> specs{
      {"center", Unit::angular, data.x[imax], -std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity(), width0},
      {"width", Unit::angular, width0, 1e-9 * width0, std::numeric_limits<double>::infinity(), width0},
      {"peak", Unit::dimensionless, peak0, -std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity(), std::abs(peak0) > 0.0 ? std::abs(peak0) : 1.0},
  };
  auto model = [&](const std::vector<double>& p) {
    std::vector<double> out(data.size());
    const double w2 = p[1] * p[1];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double d = data.x[i] - p[0];
      out[i] = p[2] * w2 / (d * d + w2);
    }
    return out;
  };
  FitResult result = least_squares(model, data, specs, opt);
  if (bound) {
    const double b = bound->value();
    result.derived.push_back({"peak_bound", Unit::dimensionless, b, std::nullopt});
    result.derived.push_back({"peak_over_bound", Unit::dimensionless, result.value("peak") / b, std::nullopt});
  }
  return result;
}

} // namespace omem
