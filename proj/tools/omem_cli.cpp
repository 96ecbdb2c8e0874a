// omem: batch front-end for the optomechanical memory toolkit.
//
//   omem simulate --config storage.json
//   omem sweep    --config dba.json --out results
//   omem fit      --config fit.json
//   omem synth    --config synth.json --seed 7
//   omem preset fig4c
//   omem --preset fig2b
//
// Output directory: --out, then $OMEM_OUT_DIR, then output.dir in the
// config, then ./out.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "omem/scenario.hpp"

namespace {

using namespace omem::scenario;

enum ExitCode { ok = 0, failure = 1, config_error = 2 };

fs::path output_dir(const std::string& flag, const std::string& from_config)
{
  if (!flag.empty())
    return flag;
  if (const char* env = std::getenv("OMEM_OUT_DIR"); env && *env)
    return env;
  if (!from_config.empty())
    return from_config;
  return "out";
}

bool accepts(const std::string& command, ScenarioKind kind)
{
  if (command == "simulate")
    return kind == ScenarioKind::storage;
  if (command == "sweep")
    return is_sweep(kind);
  if (command == "fit")
    return kind == ScenarioKind::fit;
  if (command == "synth")
    return kind == ScenarioKind::synth;
  return false;
}

int run_config(const std::string& command, const std::string& path, std::optional<std::uint64_t> seed,
               const std::string& out_flag)
{
  ScenarioConfig config = load_config(path);
  if (!accepts(command, config.kind))
    throw ConfigError("scenario: '" + std::string(scenario_name(config.kind)) + "' cannot run under '" + command +
                      "'");
  if (seed) {
    config.noise.seed = *seed;
    config.validate();
  }
  const fs::path dir = output_dir(out_flag, config.output_dir);
  run_scenario(config, dir);
  std::cout << "wrote " << (dir / "summary.json").string() << "\n";
  return ok;
}

int run_named_preset(const std::string& name, std::optional<std::uint64_t> seed, const std::string& out_flag)
{
  const fs::path dir = output_dir(out_flag, "");
  run_preset(name, dir, seed);
  std::cout << "wrote " << (dir / "summary.json").string() << "\n";
  return ok;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Optomechanical memory simulator and parameter estimation"};
  app.require_subcommand(0, 1);

  std::string config_path, out_flag, preset_flag;
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Master seed for synthetic noise");
  app.add_option("--out", out_flag, "Output directory");
  app.add_option("--preset", preset_flag, "Run a figure preset")->check(CLI::IsMember(preset_names));

  std::string command;
  for (const char* name : {"simulate", "sweep", "fit", "synth"}) {
    auto* sub = app.add_subcommand(name, std::string(name) + " scenario from a config file");
    sub->add_option("--config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed for synthetic noise");
    sub->add_option("--out", out_flag, "Output directory");
    sub->callback([&command, name] { command = name; });
  }
  std::string preset_name;
  auto* preset_cmd = app.add_subcommand("preset", "Run a figure preset");
  preset_cmd->add_option("name", preset_name, "Figure name")->required()->check(CLI::IsMember(preset_names));
  preset_cmd->add_option("--seed", seed, "Master seed for synthetic noise");
  preset_cmd->add_option("--out", out_flag, "Output directory");
  preset_cmd->callback([&command] { command = "preset"; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (command == "preset")
      return run_named_preset(preset_name, seed, out_flag);
    if (!command.empty())
      return run_config(command, config_path, seed, out_flag);
    if (!preset_flag.empty())
      return run_named_preset(preset_flag, seed, out_flag);
    std::cerr << app.help();
    return config_error;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
}
