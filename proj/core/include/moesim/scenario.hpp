#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moesim/engine.hpp"

namespace moesim {

inline constexpr int kScenarioSchemaVersion = 1;

struct WorkloadSpec {
  double arrival_rate = 1.0;   // requests per second (sweep may override)
  double duration = 60.0;      // seconds of arrivals
  std::map<std::string, double> task_mix;  // task_id -> weight
  int tokens_per_prompt = 16;  // routing-trace tokens generated per prompt
  int training_prompts = 0;    // prompts reserved for fitting the predictor
  std::uint64_t seed = 1;      // workload stream seed (combined with engine seed)
};

struct CalibrationSpec {
  // either explicit mixing weights or correlation targets to bisect for
  std::optional<double> layer_lambda;
  std::optional<double> prompt_lambda;
  std::optional<double> target_layer_corr;
  std::optional<double> target_prompt_corr;
  int initial_expert = 0;
  std::uint64_t rng_seed = 1;
};

struct SweepSpec {
  std::vector<Mode> modes;
  std::vector<double> budget_fractions;
  std::vector<int> invocation_periods;
  std::vector<double> arrival_rates;
};

struct SweepPoint {
  Mode mode = Mode::baseline;
  double budget_fraction = 1.0;
  int invocation_period = 40;
  double arrival_rate = 1.0;

  std::string key() const;  // stable file-name stem
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  ModelShape shape;
  std::vector<TaskProfile> profiles;
  CostModel cost;
  EngineConfig engine;
  WorkloadSpec workload;
  CalibrationSpec calibration;
  SweepSpec sweep;
  double sensitivity_threshold = 0.85;

  const TaskProfile& profile(const std::string& task_id) const;
  void validate() const;
};

// Parse + validate a scenario config (JSON text).  ValidationError messages
// carry the offending key path.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& origin);

// mode x budget_fraction x invocation_period x arrival_rate, in config order
std::vector<SweepPoint> expand_sweep(const Scenario& scenario);

// Deterministically generate the workload + routing trace for one sweep point.
// Identical for sweep points that share an arrival rate, so modes/budgets are
// compared on the same trace.
RunInputs build_run_inputs(const Scenario& scenario, const SweepPoint& point);

// Resolved calibration (bisection runs at most once per scenario object).
TraceCalibration resolve_calibration(const Scenario& scenario);

}  // namespace moesim
