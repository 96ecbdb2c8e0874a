#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omem {

enum class DatasetKind {
  omit_broad,
  omit_narrow,
  transmission,
  dba,
  ringdown,
  decay_T1,
  eff_bandwidth,
  eff_detuning,
};

/// Whether an OMIT ordinate is |r| or |r|².
enum class ResponseTarget { abs, abs2 };

/// Sampled measurement in internal units (abscissa rad/s or s).
struct Dataset {
  DatasetKind kind = DatasetKind::omit_broad;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> weight; // empty means uniform
  ResponseTarget target = ResponseTarget::abs2;

  std::size_t size() const noexcept { return x.size(); }
  double w(std::size_t i) const { return weight.empty() ? 1.0 : weight[i]; }

  void validate() const
  {
    if (x.size() != y.size() || (!weight.empty() && weight.size() != x.size()))
      throw std::invalid_argument("Dataset: column lengths differ");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
        throw std::invalid_argument("Dataset: non-finite value at row " + std::to_string(i));
      if (!weight.empty() && !(weight[i] >= 0.0 && std::isfinite(weight[i])))
        throw std::invalid_argument("Dataset: weights must be finite and >= 0");
    }
  }
};

/// File-facing column layout of one dataset kind.
struct DatasetColumns {
  DatasetKind kind;
  std::string_view name;
  std::string_view x_column;
  std::string_view y_column;
  bool x_is_frequency; // x stored as Hz on disk
  bool y_is_frequency;
};

inline constexpr std::array<DatasetColumns, 8> dataset_columns{{
    {DatasetKind::omit_broad, "omit_broad", "probe_freq_hz", "abs2", true, false},
    {DatasetKind::omit_narrow, "omit_narrow", "probe_freq_hz", "abs2", true, false},
    {DatasetKind::transmission, "transmission", "detuning_hz", "power_w", true, false},
    {DatasetKind::dba, "dba", "detuning_hz", "gamma_eff_hz", true, true},
    {DatasetKind::ringdown, "ringdown", "time_s", "amplitude", false, false},
    {DatasetKind::decay_T1, "decay_T1", "delay_s", "amplitude_ratio", false, false},
    {DatasetKind::eff_bandwidth, "eff_bandwidth", "gamma_sig_hz", "efficiency", true, false},
    {DatasetKind::eff_detuning, "eff_detuning", "delta_hz", "efficiency", true, false},
}};

inline const DatasetColumns& columns_of(DatasetKind kind)
{
  for (const auto& c : dataset_columns)
    if (c.kind == kind)
      return c;
  throw std::invalid_argument("unknown dataset kind");
}

inline std::string_view kind_name(DatasetKind kind) { return columns_of(kind).name; }

inline std::optional<DatasetKind> parse_kind(std::string_view name)
{
  for (const auto& c : dataset_columns)
    if (c.name == name)
      return c.kind;
  return std::nullopt;
}

inline bool is_omit(DatasetKind kind) noexcept
{
  return kind == DatasetKind::omit_broad || kind == DatasetKind::omit_narrow;
}

} // namespace omem
