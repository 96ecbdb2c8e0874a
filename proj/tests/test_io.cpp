#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "omem/estimation.hpp"
#include "omem/io.hpp"
#include "omem/numerics.hpp"

using namespace omem;

namespace {

Dataset parse(const std::string& text, DatasetKind kind)
{
  std::istringstream in(text);
  return parse_dataset(in, kind);
}

} // namespace

TEST(Csv, NumberFormatting)
{
  EXPECT_EQ(format_number(2.1e6), "2100000");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333333");
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  EXPECT_EQ(format_number(NAN), "nan");
}

TEST(Csv, WriterLayout)
{
  CsvWriter csv({"a", "b"});
  csv.row(std::vector<double>{1.5, -2.0});
  EXPECT_EQ(csv.str(), "a,b\n1.5,-2\n");
  EXPECT_THROW(csv.row(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Csv, ParserSkipsBlankLinesAndCarriageReturns)
{
  const Dataset d = parse("delay_s,amplitude_ratio\r\n\r\n0,1\r\n0.01,0.8\r\n", DatasetKind::decay_T1);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.x[1], 0.01);
  EXPECT_EQ(d.y[1], 0.8);
}

TEST(Csv, MalformedInputRejected)
{
  EXPECT_THROW(parse("", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(parse("delay_s,amplitude_ratio\n0,1,2\n", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(parse("delay_s,amplitude_ratio\n0,abc\n", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(parse("delay_s,amplitude_ratio\n0,1x\n", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(parse("delay_s,amplitude_ratio\n0,\n", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(parse("delay_s,amplitude_ratio\n0,nan\n", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(parse("time_s,amplitude\n0,1\n", DatasetKind::decay_T1), std::invalid_argument);
  EXPECT_THROW(read_dataset("/nonexistent/data.csv", DatasetKind::dba), std::runtime_error);
}

TEST(Csv, NegativeWeightRejected)
{
  EXPECT_THROW(parse("delay_s,amplitude_ratio,weight\n0,1,-1\n", DatasetKind::decay_T1), std::invalid_argument);
}

TEST(Dataset, FrequencyColumnsConvertedToAngular)
{
  const Dataset d = parse("detuning_hz,gamma_eff_hz\n-2400000,914\n", DatasetKind::dba);
  EXPECT_DOUBLE_EQ(d.x[0], hz_to_angular(-2.4e6));
  EXPECT_DOUBLE_EQ(d.y[0], hz_to_angular(914.0));
  const Dataset t = parse("time_s,amplitude\n1.5,0.25\n", DatasetKind::ringdown);
  EXPECT_EQ(t.x[0], 1.5);
}

TEST(Dataset, OmitAbsColumnSetsTarget)
{
  const Dataset sq = parse("probe_freq_hz,abs2\n1,0.5\n", DatasetKind::omit_broad);
  EXPECT_EQ(sq.target, ResponseTarget::abs2);
  const Dataset mag = parse("probe_freq_hz,abs\n1,0.5\n", DatasetKind::omit_narrow);
  EXPECT_EQ(mag.target, ResponseTarget::abs);
  EXPECT_NE(dataset_csv(mag).str().find("probe_freq_hz,abs\n"), std::string::npos);
}

TEST(Dataset, ExtraColumnsIgnoredAndWeightsRead)
{
  const Dataset d = parse("note,delay_s,weight,amplitude_ratio\n7,0.1,2,0.5\n", DatasetKind::decay_T1);
  ASSERT_EQ(d.weight.size(), 1u);
  EXPECT_EQ(d.w(0), 2.0);
  EXPECT_EQ(d.y[0], 0.5);
}

TEST(Dataset, RoundTripEveryKind)
{
  for (const auto& cols : dataset_columns) {
    Dataset d;
    d.kind = cols.kind;
    d.x = linspace(-3.0e7, 4.0e7, 13);
    for (double x : d.x)
      d.y.push_back(std::sin(x * 1e-7) + 2.0);
    d.weight.assign(d.x.size(), 0.5);
    const Dataset back = parse(dataset_csv(d).str(), cols.kind);
    ASSERT_EQ(back.size(), d.size()) << cols.name;
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_NEAR(back.x[i], d.x[i], 1e-14 * std::abs(d.x[i]) + 1e-300) << cols.name;
      EXPECT_NEAR(back.y[i], d.y[i], 1e-14 * std::abs(d.y[i])) << cols.name;
      EXPECT_EQ(back.weight[i], 0.5);
    }
  }
}

TEST(Dataset, KindNames)
{
  for (const auto& cols : dataset_columns)
    EXPECT_EQ(parse_kind(cols.name), cols.kind);
  EXPECT_FALSE(parse_kind("omit").has_value());
}

TEST(Units, KappaReadFromFileInHertz)
{
  // A cavity sweep written in Hz must fit to κ/2π = 2.1 MHz, not 2.1e6/2π.
  const SystemParams p = reference_device();
  std::ostringstream csv;
  csv << "probe_freq_hz,abs2\n";
  for (double f : linspace(0.0, 5e6, 201))
    csv << format_number(f) << "," << format_number(std::norm(bare_cavity_response(p, hz_to_angular(f)))) << "\n";
  const FitResult r = fit_cavity(parse(csv.str(), DatasetKind::omit_broad), p.eta_c);
  const auto rec = fit_record(r);
  EXPECT_NEAR(rec.at("kappa_hz").get<double>(), 2.1e6, 2.1e6 * 1e-6);
  EXPECT_NEAR(rec.at("delta_hz").get<double>(), -2.4e6, 2.4e6 * 1e-6);
}

TEST(FitRecord, KeysCarryUnits)
{
  FitResult r;
  r.parameters.push_back({"kappa", Unit::angular, hz_to_angular(2.1e6), hz_to_angular(1e3)});
  r.parameters.push_back({"t1", Unit::seconds, 0.023, std::nullopt});
  r.parameters.push_back({"p_in", Unit::watts, 1e-3, std::nullopt});
  r.derived.push_back({"q", Unit::dimensionless, INFINITY, std::nullopt});
  r.flags.emplace_back("under_constrained");
  const auto j = fit_record(r);
  EXPECT_NEAR(j.at("kappa_hz").get<double>(), 2.1e6, 1e-6);
  EXPECT_NEAR(j.at("kappa_hz_stderr").get<double>(), 1e3, 1e-9);
  EXPECT_EQ(j.at("t1_s").get<double>(), 0.023);
  EXPECT_EQ(j.at("p_in_w").get<double>(), 1e-3);
  EXPECT_EQ(j.at("q").get<std::string>(), "inf");
  EXPECT_FALSE(j.contains("t1_s_stderr"));
  EXPECT_EQ(j.at("flags")[0], "under_constrained");
  EXPECT_TRUE(j.contains("rss"));
  EXPECT_TRUE(j.contains("converged"));
}

TEST(Traces, SpectrumColumnsInHertz)
{
  SpectrumTrace t;
  t.points.push_back({hz_to_angular(2.4e6), complex(0.6, -0.8)});
  const std::string s = spectrum_csv(t).str();
  EXPECT_EQ(s, "freq_hz,re,im,abs2\n2400000,0.6,-0.8,1\n");
}
