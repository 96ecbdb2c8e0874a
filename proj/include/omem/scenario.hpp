#pragma once

// Batch scenarios: config parsing, forward-model sweeps, seeded synthetic
// datasets, fits, and the named figure presets.
//
// Config files are JSON. All frequencies are Hz, powers W, lengths m, times s.
// See docs/config.md for the schema.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "omem/core.hpp"
#include "omem/dataset.hpp"
#include "omem/estimation.hpp"
#include "omem/io.hpp"
#include "omem/lockin.hpp"
#include "omem/memory.hpp"
#include "omem/numerics.hpp"
#include "omem/response.hpp"
#include "omem/rng.hpp"

namespace omem::scenario {

namespace fs = std::filesystem;
using nlohmann::json;

/// Schema violation; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { omit_sweep, dba_sweep, storage, t1_scan, bandwidth_scan, detuning_scan, fit, synth };

inline constexpr std::array<std::pair<ScenarioKind, std::string_view>, 8> scenario_names{{
    {ScenarioKind::omit_sweep, "omit_sweep"},
    {ScenarioKind::dba_sweep, "dba_sweep"},
    {ScenarioKind::storage, "storage"},
    {ScenarioKind::t1_scan, "t1_scan"},
    {ScenarioKind::bandwidth_scan, "bandwidth_scan"},
    {ScenarioKind::detuning_scan, "detuning_scan"},
    {ScenarioKind::fit, "fit"},
    {ScenarioKind::synth, "synth"},
}};

inline std::string_view scenario_name(ScenarioKind k)
{
  for (const auto& [kind, name] : scenario_names)
    if (kind == k)
      return name;
  return "unknown";
}

inline bool is_sweep(ScenarioKind k)
{
  return k == ScenarioKind::omit_sweep || k == ScenarioKind::dba_sweep || k == ScenarioKind::t1_scan ||
         k == ScenarioKind::bandwidth_scan || k == ScenarioKind::detuning_scan;
}

enum class NoiseMode { additive, multiplicative };

struct GridSpec {
  double start = 0.0;
  double stop = 0.0;
  std::size_t count = 0;
  bool log = false;

  std::vector<double> values() const
  {
    if (count < 2)
      throw ConfigError("grid.count: must be >= 2");
    return log ? logspace(start, stop, count) : linspace(start, stop, count);
  }
};

/// Additive noise has σ = relative·max|y|; multiplicative scales each point by 1 + relative·z.
struct NoiseSpec {
  double relative = 0.0;
  NoiseMode mode = NoiseMode::additive;
  std::optional<std::uint64_t> seed;
};

struct PulseSpec {
  double beta = 0.05;
  double s0 = 1e4;
  std::optional<double> gamma_sig; // rad/s, matched to Γeff when unset
  double delta = 0.0;              // rad/s
  std::optional<double> t_write;
};

struct StorageSpec {
  double t_delay = 4.4e-3;
  std::optional<double> t_read;
  double noise_floor = 0.0;
  bool lockin = false;
  bool oracle = true;
};

struct FitSpec {
  DatasetKind kind = DatasetKind::dba;
  std::string data;
  double noise_floor = 0.0;
};

struct ScenarioConfig {
  std::string label = "run";
  ScenarioKind kind = ScenarioKind::storage;
  SystemParams system = reference_device();
  std::optional<GridSpec> grid;
  SweepKind sweep = SweepKind::broad;
  NoiseSpec noise;
  PulseSpec pulse;
  StorageSpec storage;
  std::optional<FitSpec> fit;
  std::optional<DatasetKind> synth_kind;
  bool fit_synthetic = false;
  std::string output_dir;

  void validate() const
  {
    system.validate();
    if (is_sweep(kind) || kind == ScenarioKind::synth) {
      if (!grid)
        throw ConfigError("grid: required for scenario " + std::string(scenario_name(kind)));
      if (grid->count < 2)
        throw ConfigError("grid.count: must be >= 2");
    }
    if (noise.relative < 0.0)
      throw ConfigError("noise.relative: must be >= 0");
    if (noise.relative > 0.0 && !noise.seed)
      throw ConfigError("noise.seed: required when noise.relative > 0");
    if (kind == ScenarioKind::fit && !fit)
      throw ConfigError("fit: block required for scenario fit");
    if (kind == ScenarioKind::synth && !synth_kind)
      throw ConfigError("synth.kind: required for scenario synth");
    if (label.empty() || label.find_first_of("/\\") != std::string::npos)
      throw ConfigError("label: must be a non-empty file-name stem");
  }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

class Block {
public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const
  {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
        throw ConfigError(field(it.key()) + ": unknown key");
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  std::optional<double> number(std::string_view key) const
  {
    if (!has(key))
      return std::nullopt;
    const json& v = j_.at(std::string(key));
    if (!v.is_number())
      throw ConfigError(field(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d))
      throw ConfigError(field(key) + ": must be finite");
    return d;
  }

  std::optional<std::string> string(std::string_view key) const
  {
    if (!has(key))
      return std::nullopt;
    const json& v = j_.at(std::string(key));
    if (!v.is_string())
      throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::optional<bool> boolean(std::string_view key) const
  {
    if (!has(key))
      return std::nullopt;
    const json& v = j_.at(std::string(key));
    if (!v.is_boolean())
      throw ConfigError(field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::optional<std::uint64_t> unsigned_integer(std::string_view key) const
  {
    if (!has(key))
      return std::nullopt;
    const json& v = j_.at(std::string(key));
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(field(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::optional<Block> child(std::string_view key) const
  {
    if (!has(key))
      return std::nullopt;
    return Block(j_.at(std::string(key)), field(key));
  }

  std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

private:
  const json& j_;
  std::string path_;
};

inline SystemParams parse_system(const Block& b)
{
  b.allow({"omega_m_hz", "q", "gamma_m_hz", "kappa_hz", "eta_c", "g0_hz", "delta_hz", "p_in_w", "lambda_m", "t1_s",
           "eta_loss", "eta_qe"});
  SystemParams p = reference_device();
  if (auto v = b.number("omega_m_hz"))
    p.omega_m = hz_to_angular(*v);
  if (b.has("q") && b.has("gamma_m_hz"))
    throw ConfigError(b.field("q") + ": give either q or gamma_m_hz, not both");
  if (auto v = b.number("q")) {
    if (!(*v > 0.0))
      throw ConfigError(b.field("q") + ": must be > 0");
    p.gamma_m = SystemParams::gamma_from_q(p.omega_m, *v);
  } else if (auto g = b.number("gamma_m_hz")) {
    p.gamma_m = hz_to_angular(*g);
  } else {
    p.gamma_m = SystemParams::gamma_from_q(p.omega_m, 1e8);
  }
  if (auto v = b.number("kappa_hz"))
    p.kappa = hz_to_angular(*v);
  if (auto v = b.number("eta_c"))
    p.eta_c = *v;
  if (auto v = b.number("g0_hz"))
    p.g0 = hz_to_angular(*v);
  p.delta = b.number("delta_hz") ? hz_to_angular(*b.number("delta_hz")) : -p.omega_m;
  if (auto v = b.number("p_in_w"))
    p.p_in = *v;
  if (auto v = b.number("lambda_m"))
    p.lambda_l = *v;
  if (auto v = b.number("t1_s"))
    p.t1 = *v;
  if (auto v = b.number("eta_loss"))
    p.eta_loss = *v;
  if (auto v = b.number("eta_qe"))
    p.eta_qe = *v;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(b.field("") + " " + e.what());
  }
  return p;
}

inline DatasetKind parse_dataset_kind(const Block& b, std::string_view key)
{
  const auto name = b.string(key);
  if (!name)
    throw ConfigError(b.field(key) + ": required");
  const auto kind = parse_kind(*name);
  if (!kind)
    throw ConfigError(b.field(key) + ": unknown dataset kind '" + *name + "'");
  return *kind;
}

} // namespace detail

inline ScenarioConfig parse_config(const json& j)
{
  detail::Block root(j, "");
  root.allow({"label", "scenario", "system", "grid", "sweep_kind", "pulse", "storage", "noise", "fit", "synth",
              "output"});
  ScenarioConfig c;
  const auto scenario = root.string("scenario");
  if (!scenario)
    throw ConfigError("scenario: required");
  bool known = false;
  for (const auto& [kind, name] : scenario_names)
    if (name == *scenario) {
      c.kind = kind;
      known = true;
    }
  if (!known)
    throw ConfigError("scenario: unknown kind '" + *scenario + "'");
  if (auto v = root.string("label"))
    c.label = *v;

  if (auto b = root.child("system"))
    c.system = detail::parse_system(*b);

  if (auto b = root.child("grid")) {
    b->allow({"start", "stop", "count", "spacing"});
    GridSpec g;
    const auto start = b->number("start"), stop = b->number("stop");
    const auto count = b->unsigned_integer("count");
    if (!start || !stop || !count)
      throw ConfigError("grid: start, stop and count are required");
    g.start = *start;
    g.stop = *stop;
    g.count = static_cast<std::size_t>(*count);
    const std::string spacing = b->string("spacing").value_or("linear");
    if (spacing != "linear" && spacing != "log")
      throw ConfigError("grid.spacing: expected linear or log");
    g.log = spacing == "log";
    if (g.log && !(g.start > 0.0 && g.stop > 0.0))
      throw ConfigError("grid.start: log spacing needs positive bounds");
    if (!(g.stop > g.start))
      throw ConfigError("grid.stop: must exceed grid.start");
    c.grid = g;
  }

  if (auto v = root.string("sweep_kind")) {
    if (*v == "broad")
      c.sweep = SweepKind::broad;
    else if (*v == "narrow")
      c.sweep = SweepKind::narrow;
    else
      throw ConfigError("sweep_kind: expected broad or narrow");
  }

  if (auto b = root.child("pulse")) {
    b->allow({"beta", "s0", "gamma_sig_hz", "delta_hz", "t_write_s"});
    if (auto v = b->number("beta"))
      c.pulse.beta = *v;
    if (auto v = b->number("s0"))
      c.pulse.s0 = *v;
    if (auto v = b->number("gamma_sig_hz")) {
      if (!(*v > 0.0))
        throw ConfigError("pulse.gamma_sig_hz: must be > 0");
      c.pulse.gamma_sig = hz_to_angular(*v);
    }
    if (auto v = b->number("delta_hz"))
      c.pulse.delta = hz_to_angular(*v);
    if (auto v = b->number("t_write_s"))
      c.pulse.t_write = *v;
  }

  if (auto b = root.child("storage")) {
    b->allow({"t_delay_s", "t_read_s", "noise_floor", "lockin", "oracle"});
    if (auto v = b->number("t_delay_s")) {
      if (*v < 0.0)
        throw ConfigError("storage.t_delay_s: must be >= 0");
      c.storage.t_delay = *v;
    }
    if (auto v = b->number("t_read_s"))
      c.storage.t_read = *v;
    if (auto v = b->number("noise_floor"))
      c.storage.noise_floor = *v;
    if (auto v = b->boolean("lockin"))
      c.storage.lockin = *v;
    if (auto v = b->boolean("oracle"))
      c.storage.oracle = *v;
  }

  if (auto b = root.child("noise")) {
    b->allow({"relative", "mode", "seed"});
    if (auto v = b->number("relative"))
      c.noise.relative = *v;
    const std::string mode = b->string("mode").value_or("additive");
    if (mode != "additive" && mode != "multiplicative")
      throw ConfigError("noise.mode: expected additive or multiplicative");
    c.noise.mode = mode == "additive" ? NoiseMode::additive : NoiseMode::multiplicative;
    c.noise.seed = b->unsigned_integer("seed");
  }

  if (auto b = root.child("fit")) {
    b->allow({"kind", "data", "noise_floor"});
    FitSpec f;
    f.kind = detail::parse_dataset_kind(*b, "kind");
    const auto data = b->string("data");
    if (!data)
      throw ConfigError("fit.data: required");
    f.data = *data;
    f.noise_floor = b->number("noise_floor").value_or(0.0);
    c.fit = f;
  }

  if (auto b = root.child("synth")) {
    b->allow({"kind", "fit"});
    c.synth_kind = detail::parse_dataset_kind(*b, "kind");
    c.fit_synthetic = b->boolean("fit").value_or(false);
  }

  if (auto b = root.child("output")) {
    b->allow({"dir"});
    c.output_dir = b->string("dir").value_or("");
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  ScenarioConfig c = parse_config(j);
  // Dataset paths are relative to the config file, not the working directory.
  if (c.fit && fs::path(c.fit->data).is_relative())
    c.fit->data = (path.parent_path() / c.fit->data).lexically_normal().string();
  return c;
}

// ---------------------------------------------------------------------------
// Output handling

/// Files written by one run. Unless commit() is called, they are removed on
/// destruction, so a failed run leaves no partial artifacts behind.
class OutputSet {
public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet()
  {
    if (committed_)
      return;
    std::error_code ec;
    for (const auto& f : written_)
      fs::remove(f, ec);
  }

  void write(const std::string& name, const std::string& text)
  {
    fs::create_directories(dir_);
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open " + path.string() + " for writing");
    written_.push_back(path);
    out << text;
    if (!out)
      throw std::runtime_error("write failed: " + path.string());
  }

  void commit() noexcept { committed_ = true; }
  const std::vector<fs::path>& files() const noexcept { return written_; }
  const fs::path& dir() const noexcept { return dir_; }

private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Helpers shared by the runners

inline json system_record(const SystemParams& p)
{
  return {{"omega_m_hz", json_number(angular_to_hz(p.omega_m))},
          {"gamma_m_hz", json_number(angular_to_hz(p.gamma_m))},
          {"q", json_number(p.quality_factor())},
          {"kappa_hz", json_number(angular_to_hz(p.kappa))},
          {"eta_c", json_number(p.eta_c)},
          {"g0_hz", json_number(angular_to_hz(p.g0))},
          {"delta_hz", json_number(angular_to_hz(p.delta))},
          {"p_in_w", json_number(p.p_in)},
          {"lambda_m", json_number(p.lambda_l)},
          {"t1_s", json_number(p.storage_t1())},
          {"eta_loss", json_number(p.eta_loss)},
          {"eta_qe", json_number(p.eta_qe)},
          {"sideband_resolved", p.sideband_resolved()}};
}

inline json drive_record(const DriveState& d)
{
  return {{"n_cav", json_number(d.n_cav)},
          {"g_hz", json_number(angular_to_hz(d.g))},
          {"gamma_opt_hz", json_number(angular_to_hz(d.gamma_opt))},
          {"gamma_eff_hz", json_number(angular_to_hz(d.gamma_eff))},
          {"cooperativity", d.cooperativity ? json_number(*d.cooperativity) : json("undefined")}};
}

/// Adds seeded noise in place; `stream` separates independent noisy quantities.
inline void apply_noise(std::vector<double>& y, const NoiseSpec& noise, std::uint64_t stream)
{
  if (noise.relative <= 0.0)
    return;
  NoiseSource rng(derive_seed(*noise.seed, stream));
  double peak = 0.0;
  for (double v : y)
    peak = std::max(peak, std::abs(v));
  for (double& v : y) {
    const double z = rng.normal();
    if (noise.mode == NoiseMode::additive)
      v += noise.relative * peak * z;
    else
      v *= 1.0 + noise.relative * z;
  }
}

/// Write pulse of a scenario: matched to Γeff unless gamma_sig is configured.
inline SignalPulse scenario_pulse(const ScenarioConfig& c, const DriveState& drive)
{
  const double gamma_sig = c.pulse.gamma_sig.value_or(drive.gamma_eff);
  const double t_write = c.pulse.t_write.value_or(10.0 / gamma_sig);
  return make_signal(c.pulse.beta, c.pulse.s0, gamma_sig, c.system.omega_m + c.pulse.delta, c.system.omega_m,
                     t_write);
}

inline DriveState checked_drive(const SystemParams& p)
{
  const DriveState d = drive_state(p);
  if (!(d.gamma_opt > 0.0))
    throw ConfigError("system.delta_hz: control must be red-detuned (gamma_opt > 0) for storage scenarios");
  return d;
}

inline ProtocolTimeline scenario_timeline(const ScenarioConfig& c, const DriveState& drive, const SignalPulse& pulse,
                                          double t_delay)
{
  ProtocolTimeline tl = make_timeline(c.system, drive, pulse, t_delay);
  if (c.storage.t_read)
    tl.t_read = *c.storage.t_read;
  return tl;
}

inline FitResult run_fit(DatasetKind kind, const Dataset& data, const ScenarioConfig& c, double noise_floor)
{
  switch (kind) {
  case DatasetKind::omit_broad:
  case DatasetKind::omit_narrow:
    return fit_cavity(data, c.system.eta_c);
  case DatasetKind::transmission:
    return fit_input_power(data, c.system);
  case DatasetKind::dba:
    return fit_g0(data, c.system, c.system.gamma_m);
  case DatasetKind::ringdown:
    return fit_ringdown(data, c.system.omega_m);
  case DatasetKind::decay_T1:
    return fit_T1(data, noise_floor);
  case DatasetKind::eff_bandwidth:
    return fit_eff_bandwidth(data, drive_state(c.system).gamma_eff, c.system.eta_c);
  case DatasetKind::eff_detuning:
    return fit_eff_detuning(data, StorageBound{c.system.eta_c, c.storage.t_delay, c.system.storage_t1()});
  }
  throw std::invalid_argument("run_fit: unknown dataset kind");
}

/// Peak retrieved amplitude over input amplitude for the untruncated protocol.
inline double retrieval_amplitude_ratio(const SystemParams& p, const DriveState& drive, const SignalPulse& pulse,
                                        double t_delay)
{
  const WriteSolution w = evolve_write(pulse, drive.gamma_eff, drive.gamma_opt, p.eta_c);
  const double stored = std::abs(evolve_delay(w.b0(), t_delay, p.storage_t1(), 0.0));
  return std::sqrt(p.eta_c * drive.gamma_opt) * stored / pulse.amplitude();
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Noiseless forward model of a dataset kind on the abscissae `x` (internal units).
///
/// Broad OMIT sweeps use the bare cavity (their step is far coarser than the
/// transparency window); narrow sweeps use the full OMIT response.
inline Dataset forward_dataset(DatasetKind kind, const std::vector<double>& x, const ScenarioConfig& c)
{
  const SystemParams& p = c.system;
  Dataset d;
  d.kind = kind;
  d.x = x;
  d.y.resize(x.size());
  switch (kind) {
  case DatasetKind::omit_broad:
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = std::norm(bare_cavity_response(p, x[i]));
    break;
  case DatasetKind::omit_narrow: {
    const DriveState drive = drive_state(p);
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = std::norm(omit_probe_response(p, drive, x[i]));
    break;
  }
  case DatasetKind::transmission:
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = transmission_power(p, input_mirror_transmission, output_mirror_transmission, x[i]);
    break;
  case DatasetKind::dba: {
    const auto pts = dba_sweep(p, x);
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = pts[i].gamma_eff;
    break;
  }
  case DatasetKind::ringdown:
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = std::exp(-p.gamma_m * x[i] / 2.0);
    break;
  case DatasetKind::decay_T1: {
    const DriveState drive = checked_drive(p);
    const SignalPulse pulse = scenario_pulse(c, drive);
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = retrieval_amplitude_ratio(p, drive, pulse, x[i]);
    break;
  }
  case DatasetKind::eff_bandwidth: {
    const DriveState drive = checked_drive(p);
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = closed_form_efficiency(x[i], drive.gamma_eff, 0.0, 0.0, p.storage_t1(), p.eta_c, p.gamma_m);
    break;
  }
  case DatasetKind::eff_detuning: {
    const DriveState drive = checked_drive(p);
    for (std::size_t i = 0; i < x.size(); ++i)
      d.y[i] = closed_form_efficiency(drive.gamma_eff, drive.gamma_eff, x[i], c.storage.t_delay, p.storage_t1(),
                                      p.eta_c, p.gamma_m);
    break;
  }
  }
  return d;
}

/// Forward model on the configured grid plus seeded noise.
///
/// Grid values are in the dataset's file units (Hz or s).
inline Dataset generate_synthetic(const ScenarioConfig& c)
{
  if (!c.synth_kind)
    throw ConfigError("synth.kind: required");
  if (!c.grid)
    throw ConfigError("grid: required for synthetic data");
  const DatasetColumns& cols = columns_of(*c.synth_kind);
  std::vector<double> x = c.grid->values();
  if (cols.x_is_frequency)
    for (double& v : x)
      v = hz_to_angular(v);
  Dataset d = forward_dataset(*c.synth_kind, x, c);
  apply_noise(d.y, c.noise, 0);
  return d;
}

// ---------------------------------------------------------------------------
// Scenario runners. Each writes its artifacts and returns a summary record.

namespace detail {

inline json run_omit_sweep(const ScenarioConfig& c, OutputSet& out)
{
  const DriveState drive = drive_state(c.system);
  std::vector<double> freqs = c.grid->values();
  for (double& f : freqs)
    f = hz_to_angular(f);
  const SpectrumTrace trace = omit_sweep(c.system, drive, freqs, c.sweep);
  out.write(c.label + ".csv", spectrum_csv(trace).str());
  const auto lowest = std::min_element(trace.points.begin(), trace.points.end(),
                                       [](const auto& a, const auto& b) { return std::norm(a.r) < std::norm(b.r); });
  return {{"drive", drive_record(drive)},
          {"points", trace.points.size()},
          {"sweep_kind", c.sweep == SweepKind::broad ? "broad" : "narrow"},
          {"abs2_min", json_number(std::norm(lowest->r))},
          {"abs2_min_freq_hz", json_number(angular_to_hz(lowest->omega_mod))}};
}

inline json run_dba_sweep(const ScenarioConfig& c, OutputSet& out)
{
  std::vector<double> deltas = c.grid->values();
  for (double& d : deltas)
    d = hz_to_angular(d);
  const auto pts = dba_sweep(c.system, deltas);
  CsvWriter csv({"detuning_hz", "gamma_eff_hz", "gamma_opt_hz", "n_cav"});
  const DbaPoint* widest = &pts.front();
  for (const auto& p : pts) {
    csv.row(std::vector<double>{angular_to_hz(p.delta), angular_to_hz(p.gamma_eff), angular_to_hz(p.gamma_opt),
                                p.n_cav});
    if (p.gamma_eff > widest->gamma_eff)
      widest = &p;
  }
  out.write(c.label + ".csv", csv.str());
  return {{"points", pts.size()},
          {"max_gamma_eff_hz", json_number(angular_to_hz(widest->gamma_eff))},
          {"max_gamma_eff_detuning_hz", json_number(angular_to_hz(widest->delta))}};
}

inline json run_storage(const ScenarioConfig& c, OutputSet& out)
{
  const SystemParams& p = c.system;
  const DriveState drive = checked_drive(p);
  const SignalPulse pulse = scenario_pulse(c, drive);
  const ProtocolTimeline tl = scenario_timeline(c, drive, pulse, c.storage.t_delay);
  const ProtocolResult run = simulate_protocol(p, drive, pulse, tl, c.storage.oracle);
  out.write(c.label + "_trace.csv", trace_csv(run.closed_form).str());

  const EfficiencyReport eff = efficiency(run.closed_form, p);
  json summary{{"drive", drive_record(drive)},
               {"gamma_sig_hz", json_number(angular_to_hz(pulse.gamma_sig))},
               {"delta_hz", json_number(angular_to_hz(pulse.delta))},
               {"t_delay_s", json_number(tl.t_delay)},
               {"t_write_s", json_number(tl.t_write)},
               {"t_read_s", json_number(tl.t_read)},
               {"efficiency", efficiency_record(eff)},
               {"closed_form_eta", json_number(closed_form_efficiency(pulse.gamma_sig, drive.gamma_eff, pulse.delta,
                                                                      tl.t_delay, tl.t1, p.eta_c, p.gamma_m))},
               {"retrieved_amplitude_ratio", json_number(run.closed_form.retrieved_amplitude_ratio())},
               {"warnings", run.closed_form.warnings}};
  if (run.oracle) {
    summary["oracle_deviation"] = json_number(run.oracle_deviation);
    summary["oracle_eta"] = json_number(efficiency(*run.oracle, p).eta);
  }

  if (c.storage.lockin) {
    // Carrier-domain read-out sampled at 20x the signal frequency.
    const double fs = 20.0 * pulse.omega_sig / two_pi;
    const ReadOut read = evolve_read(run.closed_form.segment(Segment::read).front().b, tl.gamma_eff_read,
                                     drive.gamma_opt, p.eta_c, tl.t_read, 1.0 / fs, pulse.delta);
    const double dt = read.t.size() > 1 ? read.t[1] : 1.0 / fs;
    const std::vector<double> v = synthesize_carrier(read.s_out, 0.0, dt, pulse.omega_sig);
    const double lp = 10.0 * drive.gamma_eff;
    const std::vector<double> env = lockin_demodulate(v, dt, pulse.omega_sig, lp);
    const std::size_t settle = static_cast<std::size_t>(5.0 / (lp * dt));
    const std::size_t stride = std::max<std::size_t>(1, read.t.size() / 2000);
    CsvWriter csv({"t_s", "envelope", "abs_s_out"});
    double worst = 0.0;
    for (std::size_t k = 0; k < env.size(); ++k) {
      if (k >= settle && k + settle < env.size())
        worst = std::max(worst, std::abs(env[k] - std::abs(read.s_out[k])) / std::abs(read.s_out[k]));
      if (k % stride == 0)
        csv.row(std::vector<double>{tl.t_delay + read.t[k], env[k], std::abs(read.s_out[k])});
    }
    out.write(c.label + "_lockin.csv", csv.str());
    summary["lockin_max_relative_error"] = json_number(worst);
  }
  return summary;
}

inline json run_t1_scan(const ScenarioConfig& c, OutputSet& out)
{
  const SystemParams& p = c.system;
  const DriveState drive = checked_drive(p);
  const SignalPulse pulse = scenario_pulse(c, drive);
  const std::vector<double> delays = c.grid->values();
  std::vector<double> amp_model, eta_pipeline, eta_model;
  for (double td : delays) {
    if (td < 0.0)
      throw ConfigError("grid.start: delays must be >= 0");
    const ProtocolTimeline tl = scenario_timeline(c, drive, pulse, td);
    const ProtocolTrace trace = closed_form_protocol(p, drive, pulse, tl);
    amp_model.push_back(trace.retrieved_amplitude_ratio());
    eta_pipeline.push_back(efficiency(trace, p).eta);
    eta_model.push_back(
        closed_form_efficiency(pulse.gamma_sig, drive.gamma_eff, pulse.delta, td, tl.t1, p.eta_c, p.gamma_m));
  }
  std::vector<double> amp = amp_model;
  apply_noise(amp, c.noise, 0);

  CsvWriter csv({"delay_s", "amplitude_ratio", "amplitude_ratio_model", "efficiency", "efficiency_model"});
  for (std::size_t i = 0; i < delays.size(); ++i)
    csv.row(std::vector<double>{delays[i], amp[i], amp_model[i], eta_pipeline[i], eta_model[i]});
  out.write(c.label + ".csv", csv.str());

  const Dataset data{DatasetKind::decay_T1, delays, amp, {}, ResponseTarget::abs2};
  return {{"drive", drive_record(drive)},
          {"t1_true_s", json_number(p.storage_t1())},
          {"fit", fit_record(fit_T1(data, c.storage.noise_floor))}};
}

inline json run_bandwidth_scan(const ScenarioConfig& c, OutputSet& out)
{
  const SystemParams& p = c.system;
  const DriveState drive = checked_drive(p);
  std::vector<double> sig = c.grid->values();
  std::vector<double> eta_pipeline, eta_model;
  for (double& s : sig) {
    s = hz_to_angular(s);
    ScenarioConfig local = c;
    local.pulse.gamma_sig = s;
    local.pulse.t_write.reset();
    const SignalPulse pulse = scenario_pulse(local, drive);
    const ProtocolTimeline tl = scenario_timeline(local, drive, pulse, 0.0);
    eta_pipeline.push_back(efficiency(closed_form_protocol(p, drive, pulse, tl), p).eta);
    eta_model.push_back(closed_form_efficiency(s, drive.gamma_eff, pulse.delta, 0.0, tl.t1, p.eta_c, p.gamma_m));
  }
  std::vector<double> measured = eta_pipeline;
  apply_noise(measured, c.noise, 0);

  CsvWriter csv({"gamma_sig_hz", "gamma_sig_over_gamma_eff", "efficiency", "efficiency_model",
                 "efficiency_closed_form"});
  for (std::size_t i = 0; i < sig.size(); ++i)
    csv.row(std::vector<double>{angular_to_hz(sig[i]), sig[i] / drive.gamma_eff, measured[i], eta_pipeline[i],
                                eta_model[i]});
  out.write(c.label + ".csv", csv.str());

  const Dataset data{DatasetKind::eff_bandwidth, sig, measured, {}, ResponseTarget::abs2};
  return {{"drive", drive_record(drive)},
          {"eta_c_squared", json_number(p.eta_c * p.eta_c)},
          {"fit", fit_record(fit_eff_bandwidth(data, drive.gamma_eff, p.eta_c))}};
}

inline json run_detuning_scan(const ScenarioConfig& c, OutputSet& out)
{
  const SystemParams& p = c.system;
  const DriveState drive = checked_drive(p);
  std::vector<double> deltas = c.grid->values();
  std::vector<double> eta_pipeline, eta_model;
  for (double& d : deltas) {
    d = hz_to_angular(d);
    ScenarioConfig local = c;
    local.pulse.delta = d;
    const SignalPulse pulse = scenario_pulse(local, drive);
    const ProtocolTimeline tl = scenario_timeline(local, drive, pulse, c.storage.t_delay);
    eta_pipeline.push_back(efficiency(closed_form_protocol(p, drive, pulse, tl), p).eta);
    eta_model.push_back(
        closed_form_efficiency(pulse.gamma_sig, drive.gamma_eff, d, tl.t_delay, tl.t1, p.eta_c, p.gamma_m));
  }
  std::vector<double> measured = eta_pipeline;
  apply_noise(measured, c.noise, 0);

  CsvWriter csv({"delta_hz", "efficiency", "efficiency_model", "efficiency_closed_form"});
  for (std::size_t i = 0; i < deltas.size(); ++i)
    csv.row(std::vector<double>{angular_to_hz(deltas[i]), measured[i], eta_pipeline[i], eta_model[i]});
  out.write(c.label + ".csv", csv.str());

  const Dataset data{DatasetKind::eff_detuning, deltas, measured, {}, ResponseTarget::abs2};
  const StorageBound bound{p.eta_c, c.storage.t_delay, p.storage_t1()};
  return {{"drive", drive_record(drive)},
          {"t_delay_s", json_number(c.storage.t_delay)},
          {"fit", fit_record(fit_eff_detuning(data, bound))}};
}

inline json run_fit_scenario(const ScenarioConfig& c, OutputSet& out)
{
  const Dataset data = read_dataset(c.fit->data, c.fit->kind);
  const json record = fit_record(run_fit(c.fit->kind, data, c, c.fit->noise_floor));
  out.write(c.label + "_fit.json", record.dump(2) + "\n");
  return {{"dataset", c.fit->data}, {"kind", std::string(kind_name(c.fit->kind))}, {"fit", record}};
}

inline json run_synth(const ScenarioConfig& c, OutputSet& out)
{
  const Dataset data = generate_synthetic(c);
  out.write(c.label + ".csv", dataset_csv(data).str());
  json summary{{"kind", std::string(kind_name(data.kind))},
               {"points", data.size()},
               {"noise_relative", json_number(c.noise.relative)},
               {"noise_mode", c.noise.mode == NoiseMode::additive ? "additive" : "multiplicative"}};
  if (c.noise.seed)
    summary["seed"] = *c.noise.seed;
  if (c.fit_synthetic) {
    // Refit what a reader of the CSV would see.
    std::istringstream in(dataset_csv(data).str());
    const Dataset reread = parse_dataset(in, data.kind);
    summary["fit"] = fit_record(run_fit(data.kind, reread, c, c.storage.noise_floor));
  }
  return summary;
}

} // namespace detail

/// Runs one scenario, writing its artifacts into `out`.
inline json run_step(const ScenarioConfig& c, OutputSet& out)
{
  c.validate();
  json summary;
  switch (c.kind) {
  case ScenarioKind::omit_sweep:
    summary = detail::run_omit_sweep(c, out);
    break;
  case ScenarioKind::dba_sweep:
    summary = detail::run_dba_sweep(c, out);
    break;
  case ScenarioKind::storage:
    summary = detail::run_storage(c, out);
    break;
  case ScenarioKind::t1_scan:
    summary = detail::run_t1_scan(c, out);
    break;
  case ScenarioKind::bandwidth_scan:
    summary = detail::run_bandwidth_scan(c, out);
    break;
  case ScenarioKind::detuning_scan:
    summary = detail::run_detuning_scan(c, out);
    break;
  case ScenarioKind::fit:
    summary = detail::run_fit_scenario(c, out);
    break;
  case ScenarioKind::synth:
    summary = detail::run_synth(c, out);
    break;
  }
  summary["label"] = c.label;
  summary["scenario"] = std::string(scenario_name(c.kind));
  summary["system"] = system_record(c.system);
  return summary;
}

/// Runs a scenario into `dir` and writes summary.json; outputs are removed if it fails.
inline json run_scenario(const ScenarioConfig& c, const fs::path& dir)
{
  OutputSet out(dir);
  json summary = run_step(c, out);
  out.write("summary.json", summary.dump(2) + "\n");
  out.commit();
  return summary;
}

// ---------------------------------------------------------------------------
// Presets. Grid ranges are read off the published figures and approximate.

inline constexpr std::array<std::string_view, 6> preset_names{"fig1c", "fig2b", "fig3b", "fig4a", "fig4b", "fig4c"};
inline constexpr std::uint64_t kDefaultPresetSeed = 20240601;

inline std::vector<ScenarioConfig> preset(std::string_view name, std::optional<std::uint64_t> seed = {})
{
  const std::uint64_t s = seed.value_or(kDefaultPresetSeed);
  const SystemParams p = reference_device();
  const double gamma_eff_hz = angular_to_hz(drive_state(p).gamma_eff);
  const double omega_m_hz = angular_to_hz(p.omega_m);

  auto base = [&](std::string label, ScenarioKind kind) {
    ScenarioConfig c;
    c.label = std::move(label);
    c.kind = kind;
    c.system = p;
    return c;
  };
  auto noisy = [&](ScenarioConfig c, double rel, NoiseMode mode) {
    c.noise = NoiseSpec{rel, mode, s};
    return c;
  };

  std::vector<ScenarioConfig> steps;
  if (name == "fig1c") {
    auto broad = base("omit_broad", ScenarioKind::omit_sweep);
    broad.grid = GridSpec{0.0, 5e6, 501, false};
    auto narrow = base("omit_narrow", ScenarioKind::omit_sweep);
    narrow.sweep = SweepKind::narrow;
    narrow.grid = GridSpec{omega_m_hz - 5.0 * gamma_eff_hz, omega_m_hz + 5.0 * gamma_eff_hz, 401, false};
    auto data = noisy(base("omit_broad_data", ScenarioKind::synth), 0.01, NoiseMode::additive);
    data.synth_kind = DatasetKind::omit_broad;
    data.fit_synthetic = true;
    data.grid = GridSpec{0.0, 5e6, 101, false};
    steps = {broad, narrow, data};
  } else if (name == "fig2b") {
    auto sweep = base("dba", ScenarioKind::dba_sweep);
    sweep.grid = GridSpec{-4.8e6, -0.3e6, 46, false};
    auto data = noisy(base("dba_data", ScenarioKind::synth), 0.10, NoiseMode::multiplicative);
    data.synth_kind = DatasetKind::dba;
    data.fit_synthetic = true;
    data.grid = GridSpec{-4.8e6, -0.3e6, 30, false};
    steps = {sweep, data};
  } else if (name == "fig3b") {
    const std::array<double, 5> ratios{4.0, 2.0, 1.0, 0.5, 0.25}; // Γeff/Γsig
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      auto st = base("storage_" + std::to_string(i), ScenarioKind::storage);
      st.pulse.gamma_sig = hz_to_angular(gamma_eff_hz / ratios[i]);
      st.storage.t_delay = 1e-3;
      st.storage.lockin = true;
      st.storage.oracle = false;
      steps.push_back(st);
    }
  } else if (name == "fig4a") {
    auto scan = noisy(base("t1_scan", ScenarioKind::t1_scan), 0.01, NoiseMode::additive);
    scan.grid = GridSpec{0.0, 50e-3, 26, false};
    steps = {scan};
  } else if (name == "fig4b") {
    auto scan = noisy(base("bandwidth_scan", ScenarioKind::bandwidth_scan), 0.03, NoiseMode::multiplicative);
    scan.grid = GridSpec{0.05 * gamma_eff_hz, 20.0 * gamma_eff_hz, 30, true};
    steps = {scan};
  } else if (name == "fig4c") {
    auto scan = noisy(base("detuning_scan", ScenarioKind::detuning_scan), 0.02, NoiseMode::additive);
    scan.grid = GridSpec{-5.0 * gamma_eff_hz, 5.0 * gamma_eff_hz, 41, false};
    scan.storage.t_delay = 4.4e-3;
    steps = {scan};
  } else {
    throw ConfigError("preset: unknown figure '" + std::string(name) + "'");
  }
  return steps;
}

/// Runs every step of a preset into `dir` with one combined summary.json.
inline json run_preset(std::string_view name, const fs::path& dir, std::optional<std::uint64_t> seed = {})
{
  const auto steps = preset(name, seed);
  OutputSet out(dir);
  json summary{{"preset", std::string(name)}, {"seed", seed.value_or(kDefaultPresetSeed)}, {"steps", json::object()}};
  for (const auto& step : steps)
    summary["steps"][step.label] = run_step(step, out);
  out.write("summary.json", summary.dump(2) + "\n");
  out.commit();
  return summary;
}

} // namespace omem::scenario
