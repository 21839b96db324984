#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "moesim/scenario.hpp"

namespace moesim {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<Mode> mode;  // restrict the sweep to one mode
  bool quiet = false;
};

// Execute every sweep point of a scenario config (points run in parallel),
// writing per-point metrics/events/placement files plus summary.csv/.json
// under output_dir.  Returns the number of failed sweep points.
int run_scenario(const std::string& config_path, const std::string& output_dir,
                 const RunOverrides& overrides);

// Read a summary.csv and write comparison.csv (mode-vs-baseline ratios) next
// to it or to explicit_out when given.
void compare_modes(const std::string& summary_path, const std::string& explicit_out = "");

}  // namespace moesim
