#pragma once

// File formats.
//
// CSV dialect: comma separated, '.' decimal point, one header row, LF line
// endings, numbers printed with "%.15g". Frequencies on disk are Hz.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omem/dataset.hpp"
#include "omem/least_squares.hpp"
#include "omem/memory.hpp"
#include "omem/response.hpp"

namespace omem {

inline std::string format_number(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

/// Builds a CSV document in memory; write() emits it in one go.
class CsvWriter {
public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size())
  {
    append_row(header);
  }

  void row(const std::vector<double>& values)
  {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values)
      cells.push_back(format_number(v));
    append_row(cells);
  }

  void row(const std::vector<std::string>& cells) { append_row(cells); }

  const std::string& str() const noexcept { return text_; }

  void write(const std::string& path) const
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open " + path + " for writing");
    out << text_;
    if (!out)
      throw std::runtime_error("write failed: " + path);
  }

private:
  void append_row(const std::vector<std::string>& cells)
  {
    if (cells.size() != columns_)
      throw std::invalid_argument("CsvWriter: row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i)
        text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const
  {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name)
        return i;
    return std::nullopt;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ','))
    cells.push_back(cell);
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

inline CsvTable parse_csv(std::istream& in)
{
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields");
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty())
    throw std::invalid_argument("CSV: missing header row");
  return table;
}

inline double parse_number(const std::string& cell)
{
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end == cell.c_str())
    throw std::invalid_argument("CSV: not a number: '" + cell + "'");
  if (*end != '\0')
    throw std::invalid_argument("CSV: trailing characters in '" + cell + "'");
  return v;
}

/// Reads a dataset of the given kind; extra columns are ignored.
///
/// OMIT datasets accept either an `abs2` or an `abs` ordinate, which sets
/// Dataset::target. An optional `weight` column gives per-point weights.
inline Dataset parse_dataset(std::istream& in, DatasetKind kind)
{
  const CsvTable table = parse_csv(in);
  const DatasetColumns& cols = columns_of(kind);
  Dataset data;
  data.kind = kind;
  const auto xi = table.column(cols.x_column);
  if (!xi)
    throw std::invalid_argument("dataset " + std::string(cols.name) + ": missing column " +
                                std::string(cols.x_column));
  auto yi = table.column(cols.y_column);
  if (is_omit(kind) && !yi) {
    yi = table.column("abs");
    data.target = ResponseTarget::abs;
  }
  if (!yi)
    throw std::invalid_argument("dataset " + std::string(cols.name) + ": missing column " +
                                std::string(cols.y_column));
  const auto wi = table.column("weight");
  const double xs = cols.x_is_frequency ? two_pi : 1.0;
  const double ys = cols.y_is_frequency ? two_pi : 1.0;
  for (const auto& row : table.rows) {
    data.x.push_back(xs * parse_number(row[*xi]));
    data.y.push_back(ys * parse_number(row[*yi]));
    if (wi)
      data.weight.push_back(parse_number(row[*wi]));
  }
  data.validate();
  return data;
}

inline Dataset read_dataset(const std::string& path, DatasetKind kind)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open dataset " + path);
  return parse_dataset(in, kind);
}

inline CsvWriter dataset_csv(const Dataset& data)
{
  const DatasetColumns& cols = columns_of(data.kind);
  std::string y_name(cols.y_column);
  if (is_omit(data.kind) && data.target == ResponseTarget::abs)
    y_name = "abs";
  std::vector<std::string> header{std::string(cols.x_column), y_name};
  if (!data.weight.empty())
    header.emplace_back("weight");
  CsvWriter csv(header);
  const double xs = cols.x_is_frequency ? two_pi : 1.0;
  const double ys = cols.y_is_frequency ? two_pi : 1.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> row{data.x[i] / xs, data.y[i] / ys};
    if (!data.weight.empty())
      row.push_back(data.weight[i]);
    csv.row(row);
  }
  return csv;
}

inline CsvWriter spectrum_csv(const SpectrumTrace& trace)
{
  CsvWriter csv({"freq_hz", "re", "im", "abs2"});
  for (const auto& p : trace.points)
    csv.row(std::vector<double>{angular_to_hz(p.omega_mod), p.r.real(), p.r.imag(), std::norm(p.r)});
  return csv;
}

inline CsvWriter trace_csv(const ProtocolTrace& trace)
{
  CsvWriter csv({"t_s", "s_in_re", "s_in_im", "b_re", "b_im", "s_out_re", "s_out_im", "segment"});
  for (const auto& p : trace.points) {
    csv.row(std::vector<std::string>{format_number(p.t), format_number(p.s_in.real()), format_number(p.s_in.imag()),
                                     format_number(p.b.real()), format_number(p.b.imag()),
                                     format_number(p.s_out.real()), format_number(p.s_out.imag()),
                                     segment_name(p.segment)});
  }
  return csv;
}

/// JSON number at CSV precision, or "inf" / "-inf" / "nan" which JSON cannot hold.
inline nlohmann::json json_number(double v)
{
  if (std::isfinite(v))
    return std::strtod(format_number(v).c_str(), nullptr);
  return format_number(v);
}

inline std::string unit_suffix(Unit u)
{
  switch (u) {
  case Unit::angular:
    return "_hz";
  case Unit::seconds:
    return "_s";
  case Unit::watts:
    return "_w";
  case Unit::dimensionless:
    return "";
  }
  return "";
}

inline double external_value(Unit u, double v) { return u == Unit::angular ? angular_to_hz(v) : v; }

/// Flat key-value record; keys carry units, e.g. kappa_hz, kappa_hz_stderr.
inline nlohmann::json fit_record(const FitResult& r)
{
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](const FitParameter& p) {
    const std::string key = p.name + unit_suffix(p.unit);
    j[key] = json_number(external_value(p.unit, p.value));
    if (p.std_error)
      j[key + "_stderr"] = json_number(external_value(p.unit, *p.std_error));
  };
  for (const auto& p : r.parameters)
    put(p);
  for (const auto& p : r.derived)
    put(p);
  j["rss"] = json_number(r.rss);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["singular_jacobian"] = r.singular_jacobian;
  j["flags"] = r.flags;
  return j;
}

inline nlohmann::json efficiency_record(const EfficiencyReport& e)
{
  return {{"eta_int", json_number(e.eta_int)},
          {"eta", json_number(e.eta)},
          {"eta_detected", json_number(e.eta_detected)},
          {"energy_in", json_number(e.energy_in)},
          {"energy_out", json_number(e.energy_out)},
          {"input_truncation", json_number(e.input_truncation)},
          {"write_truncation", json_number(e.write_truncation)},
          {"read_truncation", json_number(e.read_truncation)}};
}

} // namespace omem
