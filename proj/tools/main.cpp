#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "moesim/driver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixture-of-experts serving simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string mode_name;
  bool quiet = false;
  CLI::App* run_cmd = app.add_subcommand("run", "run every sweep point of a scenario config");
  run_cmd->add_option("--config", config_path, "scenario config (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "output directory (default: out)");
  run_cmd->add_option("--seed", seed, "override the engine seed");
  run_cmd->add_option("--mode", mode_name, "restrict the sweep to one mode");
  run_cmd->add_flag("--quiet", quiet, "suppress progress output");

  std::string summary_path;
  std::string comparison_out;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "write mode-vs-baseline ratios from a summary.csv");
  compare_cmd->add_option("--summary", summary_path, "summary.csv produced by run")->required();
  compare_cmd->add_option("--out", comparison_out, "comparison output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (run_cmd->parsed()) {
      moesim::RunOverrides overrides;
      if (run_cmd->count("--seed") > 0) overrides.seed = seed;
      if (!mode_name.empty()) overrides.mode = moesim::mode_from_string(mode_name);
      overrides.quiet = quiet;
      const int failed = moesim::run_scenario(config_path, out_dir, overrides);
      return failed == 0 ? kExitOk : kExitRuntime;
    }
    moesim::compare_modes(summary_path, comparison_out);
    return kExitOk;
  } catch (const moesim::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
