#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "omem/numerics.hpp"
#include "omem/response.hpp"

using namespace omem;

namespace {

// Steady state of the linearized two-mode equations in the probe frame,
// integrated from rest with RK4 until the transients have decayed:
//   A' = -(κ/2 - i(Δ+Ω)) A - i g B + sqrt(ηc κ) s
//   B' = -(Γm/2 - i(Ω-Ωm)) B - i g A
complex steady_state_reflection(const SystemParams& p, double g, double omega, double settle_rate)
{
  using State = Eigen::Vector2cd;
  const complex i(0.0, 1.0);
  const complex ca = -complex(p.kappa / 2.0, -(p.delta + omega));
  const complex cb = -complex(p.gamma_m / 2.0, -(omega - p.omega_m));
  const double feed = std::sqrt(p.eta_c * p.kappa);
  auto rhs = [&](double, const State& y) {
    State dy;
    dy(0) = ca * y(0) - i * g * y(1) + feed;
    dy(1) = cb * y(1) - i * g * y(0);
    return dy;
  };
  const double fastest = std::max({std::abs(ca), std::abs(cb), g});
  const double h = 0.02 / fastest;
  const auto steps = static_cast<std::size_t>(std::ceil(40.0 / settle_rate / h));
  State y = State::Zero();
  for (std::size_t k = 0; k < steps; ++k)
    y = rk4_step(y, h * static_cast<double>(k), h, rhs);
  return 1.0 - feed * y(0);
}

// Small system with the same structure but fast enough to integrate densely.
SystemParams toy()
{
  SystemParams p;
  p.omega_m = 10.0;
  p.gamma_m = 0.05;
  p.kappa = 4.0;
  p.eta_c = 0.7;
  p.g0 = 1.0;
  p.delta = -10.0;
  p.p_in = 0.0;
  return p;
}

} // namespace

TEST(Omit, CriticallyCoupledResonance)
{
  SystemParams p = reference_device();
  p.eta_c = 1.0;
  const complex r = bare_cavity_response(p, -p.delta);
  EXPECT_NEAR(r.real(), -1.0, 1e-15);
  EXPECT_NEAR(r.imag(), 0.0, 1e-15);
}

TEST(Omit, FarOffResonanceIsAMirror)
{
  const SystemParams p = reference_device();
  EXPECT_NEAR(std::abs(bare_cavity_response(p, 1e13)), 1.0, 1e-6);
  EXPECT_NEAR(std::abs(bare_cavity_response(p, -1e13)), 1.0, 1e-6);
}

TEST(Omit, BareResponseIsZeroCoupling)
{
  const SystemParams p = reference_device();
  DriveState off = drive_state(p);
  off.g = 0.0;
  for (double w : linspace(0.0, hz_to_angular(5e6), 51))
    EXPECT_EQ(omit_probe_response(p, off, w), bare_cavity_response(p, w));
}

TEST(Omit, BareDipLinewidthIsKappa)
{
  const SystemParams p = reference_device();
  const double center = -p.delta;
  const double floor = std::norm(bare_cavity_response(p, center));
  const double far = 1.0;
  const double half = (floor + far) / 2.0;
  // |r|² - 1 is a Lorentzian in Δ+Ω with half width κ/2.
  EXPECT_NEAR(std::norm(bare_cavity_response(p, center + p.kappa / 2.0)), half, 1e-12);
  EXPECT_NEAR(std::norm(bare_cavity_response(p, center - p.kappa / 2.0)), half, 1e-12);
}

TEST(Omit, ContinuousInCoupling)
{
  const SystemParams p = reference_device();
  DriveState d = drive_state(p);
  const double w = -p.delta + hz_to_angular(3e3);
  double previous = 1.0;
  for (double g : {1e3, 1e2, 1e1, 1e0, 1e-1}) {
    d.g = g;
    const double err = std::abs(omit_probe_response(p, d, w) - bare_cavity_response(p, w));
    EXPECT_LT(err, previous);
    previous = err;
  }
  EXPECT_LT(previous, 1e-9);
}

TEST(Omit, PassiveWhenRedDetuned)
{
  SystemParams p = reference_device();
  for (double delta_hz : {-4.8e6, -2.4e6, -1.0e6, -0.3e6}) {
    p.delta = hz_to_angular(delta_hz);
    const DriveState d = drive_state(p);
    for (double w : linspace(-hz_to_angular(8e6), hz_to_angular(8e6), 2001))
      EXPECT_LE(std::abs(omit_probe_response(p, d, w)), 1.0 + 1e-14);
    for (double dw : linspace(-5.0 * d.gamma_eff, 5.0 * d.gamma_eff, 401))
      EXPECT_LE(std::abs(omit_probe_response(p, d, p.omega_m + dw)), 1.0 + 1e-14);
  }
}

TEST(Omit, TransparencyWindowWidthIsGammaEff)
{
  const SystemParams p = reference_device();
  const DriveState d = drive_state(p);
  auto feature = [&](double x) {
    const double w = p.omega_m + x;
    return std::norm(omit_probe_response(p, d, w)) - std::norm(bare_cavity_response(p, w));
  };
  const double top = feature(0.0);
  ASSERT_GT(top, 0.0);
  auto half_crossing = [&](double sign) {
    double lo = 0.0, hi = sign * 10.0 * d.gamma_eff;
    for (int k = 0; k < 200; ++k) {
      const double mid = (lo + hi) / 2.0;
      (feature(mid) > top / 2.0 ? lo : hi) = mid;
    }
    return lo;
  };
  const double width = half_crossing(1.0) - half_crossing(-1.0);
  // The reflection model keeps only the anti-Stokes sideband, so its window is
  // Γm + 4g²/κ; Γeff also subtracts the Stokes term, smaller by ~(κ/4Ωm)².
  const double rwa_width = p.gamma_m + 4.0 * d.g * d.g / p.kappa;
  EXPECT_NEAR(width / rwa_width, 1.0, 0.01);
  EXPECT_NEAR(width / d.gamma_eff, 1.0, std::pow(p.kappa / (4.0 * p.omega_m), 2) + 0.01);
}

TEST(Omit, DipSitsAtMechanicalResonance)
{
  const SystemParams p = reference_device();
  const DriveState d = drive_state(p);
  const auto grid = linspace(p.omega_m - 5.0 * d.gamma_eff, p.omega_m + 5.0 * d.gamma_eff, 2001);
  const SpectrumTrace t = omit_sweep(p, d, grid, SweepKind::narrow);
  std::size_t top = 0;
  for (std::size_t i = 0; i < t.points.size(); ++i)
    if (std::norm(t.points[i].r) > std::norm(t.points[top].r))
      top = i;
  EXPECT_NEAR(t.points[top].omega_mod, p.omega_m, 2.0 * (grid[1] - grid[0]));
}

TEST(Omit, SteadyStateOracleToySystem)
{
  SystemParams p = toy();
  for (double g : {0.0, 0.3, 1.0}) {
    const double rate = p.gamma_m + 4.0 * g * g / p.kappa;
    DriveState d;
    d.g = g;
    for (double w : {6.0, 9.5, 10.0, 10.2, 14.0}) {
      const complex expected = omit_probe_response(p, d, w);
      const complex got = steady_state_reflection(p, g, w, rate / 2.0);
      EXPECT_LT(std::abs(got - expected), 1e-6 * std::abs(expected)) << "g=" << g << " w=" << w;
    }
  }
}

TEST(Omit, SteadyStateOracleDevice)
{
  const SystemParams p = reference_device();
  const DriveState d = drive_state(p);
  for (double offset : {0.0, 0.5 * d.gamma_eff, 3.0 * d.gamma_eff}) {
    const double w = p.omega_m + offset;
    const complex expected = omit_probe_response(p, d, w);
    const complex got = steady_state_reflection(p, d.g, w, d.gamma_eff / 2.0);
    EXPECT_LT(std::abs(got - expected), 1e-6 * std::abs(expected)) << "offset=" << offset;
  }
}

TEST(OmitSweep, TwoPointTrace)
{
  const SystemParams p = reference_device();
  const std::vector<double> w{1.0, 2.0};
  const SpectrumTrace t = omit_sweep(p, drive_state(p), w, SweepKind::broad);
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_LT(t.points[0].omega_mod, t.points[1].omega_mod);
}

TEST(OmitSweep, RejectsUnorderedFrequencies)
{
  const SystemParams p = reference_device();
  const std::vector<double> w{2.0, 1.0};
  EXPECT_THROW(omit_sweep(p, drive_state(p), w, SweepKind::broad), std::invalid_argument);
}

TEST(Dba, ResonantPointHasIntrinsicLinewidth)
{
  const SystemParams p = reference_device();
  const std::vector<double> deltas{0.0};
  EXPECT_EQ(dba_sweep(p, deltas)[0].gamma_eff, p.gamma_m);
}

TEST(Dba, SymmetricGridSumsToTwiceIntrinsic)
{
  const SystemParams p = reference_device();
  const auto deltas = linspace(-hz_to_angular(5e6), hz_to_angular(5e6), 101);
  const auto pts = dba_sweep(p, deltas);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double sum = pts[i].gamma_eff + pts[pts.size() - 1 - i].gamma_eff;
    EXPECT_NEAR(sum, 2.0 * p.gamma_m, 1e-12 * std::abs(pts[i].gamma_eff));
  }
}

TEST(Dba, MaxBroadeningMatchesCooperativity)
{
  SystemParams p = reference_device();
  p.p_in = power_for_photon_number(p, 5.04e8);
  const auto deltas = linspace(-hz_to_angular(4.8e6), -hz_to_angular(0.3e6), 451);
  const auto pts = dba_sweep(p, deltas);
  const double c = *cooperativity(p, 5.04e8);
  const auto at_sideband = dba_sweep(p, std::vector<double>{-p.omega_m})[0];
  EXPECT_LE(std::abs(at_sideband.gamma_opt / p.gamma_m / c - 1.0), std::pow(p.kappa / (4.0 * p.omega_m), 2));
  double best = 0.0;
  for (const auto& pt : pts)
    best = std::max(best, pt.gamma_opt);
  EXPECT_GE(best, at_sideband.gamma_opt);
}

TEST(Transmission, PeakOnResonanceAndDecaysAway)
{
  const SystemParams p = reference_device();
  const auto deltas = linspace(-hz_to_angular(5e6), hz_to_angular(5e6), 201);
  std::size_t best = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (transmission_power(p, 280e-6, 10e-6, deltas[i]) > transmission_power(p, 280e-6, 10e-6, deltas[best]))
      best = i;
  EXPECT_EQ(deltas[best], 0.0);
  EXPECT_LT(transmission_power(p, 280e-6, 10e-6, 1e15), 1e-12 * transmission_power(p, 280e-6, 10e-6, 0.0));
}

TEST(Transmission, LinearInInputPower)
{
  SystemParams p = reference_device();
  const double before = transmission_power(p, 280e-6, 10e-6, 1e6);
  p.p_in *= 2.0;
  EXPECT_DOUBLE_EQ(transmission_power(p, 280e-6, 10e-6, 1e6), 2.0 * before);
}

TEST(Transmission, MirrorCouplingFractions)
{
  const MirrorCoupling m = mirror_coupling(0.63, 280e-6, 10e-6);
  EXPECT_DOUBLE_EQ(m.eta_in, 0.63);
  EXPECT_NEAR(m.eta_out, 0.63 * 10.0 / 280.0, 1e-15);
  EXPECT_GT(m.excess_loss, 0.0);
  EXPECT_THROW(mirror_coupling(0.63, 280e-6, 200e-6), std::invalid_argument);
  EXPECT_THROW(mirror_coupling(0.63, 0.0, 10e-6), std::invalid_argument);
}
