#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "omem/scenario.hpp"

using namespace omem;
using namespace omem::scenario;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
  const fs::path dir = fs::temp_directory_path() / ("omem_scenario_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error(const json& j)
{
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::size_t line_count(const std::string& text)
{
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace

TEST(Config, MinimalStorageUsesDefaults)
{
  const ScenarioConfig c = parse_config(json{{"scenario", "storage"}});
  EXPECT_EQ(c.kind, ScenarioKind::storage);
  EXPECT_EQ(c.label, "run");
  EXPECT_EQ(c.system.omega_m, reference_device().omega_m);
  EXPECT_EQ(c.storage.t_delay, 4.4e-3);
}

TEST(Config, SystemFieldsAreHertz)
{
  const ScenarioConfig c =
      parse_config(json{{"scenario", "storage"}, {"system", {{"kappa_hz", 1.0e6}, {"omega_m_hz", 3.0e6}, {"q", 2e8}}}});
  EXPECT_DOUBLE_EQ(c.system.kappa, hz_to_angular(1.0e6));
  EXPECT_DOUBLE_EQ(c.system.omega_m, hz_to_angular(3.0e6));
  EXPECT_DOUBLE_EQ(c.system.delta, -hz_to_angular(3.0e6));
  EXPECT_NEAR(c.system.quality_factor(), 2e8, 1.0);
}

TEST(Config, ErrorsNameTheField)
{
  EXPECT_EQ(config_error(json{{"label", "x"}}), "scenario: required");
  EXPECT_NE(config_error(json{{"scenario", "teleport"}}).find("scenario"), std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "storage"}, {"system", {{"kappa", 1.0}}}}).find("system.kappa"),
            std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "storage"}, {"extra", 1}}).find("extra"), std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "storage"}, {"system", {{"kappa_hz", "wide"}}}}).find("system.kappa_hz"),
            std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "storage"}, {"pulse", {{"gamma_sig_hz", -1.0}}}}).find("pulse.gamma_sig_hz"),
            std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "omit_sweep"}}).find("grid"), std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "omit_sweep"}, {"grid", {{"start", 0}, {"stop", 1e6}, {"count", 1}}}})
                .find("grid.count"),
            std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "omit_sweep"}, {"grid", {{"start", 1e6}, {"stop", 0}, {"count", 5}}}})
                .find("grid.stop"),
            std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "fit"}, {"fit", {{"kind", "dba"}}}}).find("fit.data"), std::string::npos);
  EXPECT_NE(config_error(json{{"scenario", "fit"}, {"fit", {{"kind", "bogus"}, {"data", "x.csv"}}}}).find("fit.kind"),
            std::string::npos);
}

TEST(Config, NoiseNeedsSeed)
{
  const json j{{"scenario", "synth"},
               {"synth", {{"kind", "dba"}}},
               {"grid", {{"start", -4.8e6}, {"stop", -0.3e6}, {"count", 5}}},
               {"noise", {{"relative", 0.1}}}};
  EXPECT_NE(config_error(j).find("seed"), std::string::npos);
  json seeded = j;
  seeded["noise"]["seed"] = 4;
  EXPECT_EQ(config_error(seeded), "");
}

TEST(Config, MalformedFileReported)
{
  const fs::path dir = scratch("malformed");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"scenario\": ";
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Grid, LinearAndLog)
{
  const auto lin = GridSpec{0.0, 1.0, 5, false}.values();
  EXPECT_EQ(lin.back(), 1.0);
  const auto lg = GridSpec{1.0, 100.0, 3, true}.values();
  EXPECT_NEAR(lg[1], 10.0, 1e-12);
}

TEST(Scenarios, TwoPointOmitSweep)
{
  const fs::path dir = scratch("two_point");
  ScenarioConfig c = parse_config(json{{"scenario", "omit_sweep"},
                                       {"label", "tiny"},
                                       {"sweep_kind", "broad"},
                                       {"grid", {{"start", 0.0}, {"stop", 5e6}, {"count", 2}}}});
  run_scenario(c, dir);
  const std::string csv = slurp(dir / "tiny.csv");
  EXPECT_EQ(line_count(csv), 3u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "freq_hz,re,im,abs2");
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}

TEST(Scenarios, StorageMatchesClosedForm)
{
  const fs::path dir = scratch("storage");
  const json s = run_scenario(parse_config(json{{"scenario", "storage"}}), dir);
  const double eta = s.at("efficiency").at("eta").get<double>();
  EXPECT_NEAR(eta, 0.3278, 0.002);
  EXPECT_NEAR(eta / s.at("closed_form_eta").get<double>(), 1.0, 1e-3);
  EXPECT_LT(s.at("oracle_deviation").get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(dir / "run_trace.csv"));
}

TEST(Scenarios, ByteIdenticalReruns)
{
  const json j{{"scenario", "t1_scan"},
               {"grid", {{"start", 0.0}, {"stop", 0.05}, {"count", 11}}},
               {"noise", {{"relative", 0.01}, {"seed", 12}}}};
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_scenario(parse_config(j), a);
  run_scenario(parse_config(j), b);
  EXPECT_EQ(slurp(a / "run.csv"), slurp(b / "run.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Scenarios, FailedRunLeavesNoFiles)
{
  const fs::path dir = scratch("failed");
  {
    OutputSet out(dir);
    out.write("partial.csv", "a\n1\n");
    EXPECT_TRUE(fs::exists(dir / "partial.csv"));
  }
  EXPECT_FALSE(fs::exists(dir / "partial.csv"));

  const ScenarioConfig c =
      parse_config(json{{"scenario", "fit"}, {"fit", {{"kind", "dba"}, {"data", (dir / "absent.csv").string()}}}});
  EXPECT_THROW(run_scenario(c, dir), std::runtime_error);
  EXPECT_FALSE(fs::exists(dir / "summary.json"));
}

TEST(Synth, NoiselessEqualsForwardModel)
{
  const ScenarioConfig c = parse_config(
      json{{"scenario", "synth"}, {"synth", {{"kind", "dba"}}}, {"grid", {{"start", -4.8e6}, {"stop", -0.3e6}, {"count", 10}}}});
  const Dataset d = generate_synthetic(c);
  const auto model = dba_sweep(c.system, d.x);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_EQ(d.y[i], model[i].gamma_eff);
}

TEST(Synth, SeedsSelectIndependentNoise)
{
  json j{{"scenario", "synth"},
         {"synth", {{"kind", "decay_T1"}}},
         {"grid", {{"start", 0.0}, {"stop", 0.05}, {"count", 20}}},
         {"noise", {{"relative", 0.05}, {"seed", 1}}}};
  const Dataset a = generate_synthetic(parse_config(j));
  const Dataset again = generate_synthetic(parse_config(j));
  j["noise"]["seed"] = 2;
  const Dataset b = generate_synthetic(parse_config(j));
  EXPECT_EQ(a.y, again.y);
  EXPECT_NE(a.y, b.y);
}

TEST(Synth, DbaRoundTripThroughCsv)
{
  const fs::path dir = scratch("synth_dba");
  const json s = run_scenario(parse_config(json{{"scenario", "synth"},
                                                {"label", "dba"},
                                                {"synth", {{"kind", "dba"}, {"fit", true}}},
                                                {"grid", {{"start", -4.8e6}, {"stop", -0.3e6}, {"count", 30}}}}),
                              dir);
  EXPECT_NEAR(s.at("fit").at("g0_hz").get<double>(), 1.0, 1e-9);

  const ScenarioConfig fit = parse_config(
      json{{"scenario", "fit"}, {"label", "refit"}, {"fit", {{"kind", "dba"}, {"data", (dir / "dba.csv").string()}}}});
  const json r = run_scenario(fit, dir);
  EXPECT_NEAR(r.at("fit").at("g0_hz").get<double>(), 1.0, 1e-9);
  EXPECT_TRUE(fs::exists(dir / "refit_fit.json"));
}

TEST(Presets, NamesAndSteps)
{
  EXPECT_EQ(preset_names.size(), 6u);
  for (auto name : preset_names)
    EXPECT_FALSE(preset(name).empty()) << name;
  EXPECT_EQ(preset("fig3b").size(), 5u);
  EXPECT_THROW(preset("fig9z"), ConfigError);
}

TEST(Presets, SeedChangesNoiseOnly)
{
  const auto a = preset("fig4a", 1), b = preset("fig4a", 2);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_NE(a[0].noise.seed, b[0].noise.seed);
  EXPECT_EQ(a[0].grid->values(), b[0].grid->values());
}
