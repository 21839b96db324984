#include "moesim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "moesim/report.hpp"

namespace moesim {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

const json& member(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "required");
  return *it;
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) fail(path, "expected an integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail(path, "must be >= 0");
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

double opt_double(const json& obj, const std::string& path, const char* key, double def) {
  auto it = obj.find(key);
  return it == obj.end() ? def : as_double(*it, join(path, key));
}

int opt_int(const json& obj, const std::string& path, const char* key, int def) {
  auto it = obj.find(key);
  return it == obj.end() ? def : as_int(*it, join(path, key));
}

std::uint64_t opt_u64(const json& obj, const std::string& path, const char* key,
                      std::uint64_t def) {
  auto it = obj.find(key);
  return it == obj.end() ? def : as_u64(*it, join(path, key));
}

LengthDist parse_length_dist(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object with family/a/b");
  LengthDist d;
  const std::string family = as_string(member(v, path, "family"), join(path, "family"));
  if (family == "constant") d.family = LengthDist::Family::constant;
  else if (family == "uniform") d.family = LengthDist::Family::uniform;
  else if (family == "lognormal") d.family = LengthDist::Family::lognormal;
  else fail(join(path, "family"), "expected constant, uniform, or lognormal");
  d.a = as_double(member(v, path, "a"), join(path, "a"));
  d.b = opt_double(v, path, "b", 0.0);
  d.validate(path);
  return d;
}

TaskProfile parse_task(const json& v, const std::string& path, double threshold,
                       int num_layers) {
  if (!v.is_object()) fail(path, "expected an object");
  TaskProfile p;
  p.task_id = as_string(member(v, path, "task_id"), join(path, "task_id"));
  p.name = v.contains("name") ? as_string(v["name"], join(path, "name")) : p.task_id;
  if (v.contains("keywords")) {
    const json& kw = v["keywords"];
    if (!kw.is_array()) fail(join(path, "keywords"), "expected an array of strings");
    for (size_t i = 0; i < kw.size(); ++i)
      p.keywords.push_back(
          as_string(kw[i], join(path, "keywords") + "[" + std::to_string(i) + "]"));
  }
  p.input_tokens = parse_length_dist(member(v, path, "input_tokens"), join(path, "input_tokens"));
  p.output_tokens =
      parse_length_dist(member(v, path, "output_tokens"), join(path, "output_tokens"));
  p.expected_output_tokens = opt_double(v, path, "expected_output_tokens", 0.0);
  p.slo_ttft = as_double(member(v, path, "slo_ttft"), join(path, "slo_ttft"));
  if (v.contains("sensitivity") && v.contains("accuracy_curve"))
    fail(path, "give either sensitivity or accuracy_curve, not both");
  if (v.contains("sensitivity")) {
    const json& s = v["sensitivity"];
    if (!s.is_array()) fail(join(path, "sensitivity"), "expected an array of 0/1 flags");
    for (size_t i = 0; i < s.size(); ++i)
      p.sensitivity.push_back(
          as_int(s[i], join(path, "sensitivity") + "[" + std::to_string(i) + "]"));
  } else if (v.contains("accuracy_curve")) {
    const json& c = v["accuracy_curve"];
    if (!c.is_array()) fail(join(path, "accuracy_curve"), "expected an array of numbers");
    std::vector<double> curve;
    for (size_t i = 0; i < c.size(); ++i)
      curve.push_back(
          as_double(c[i], join(path, "accuracy_curve") + "[" + std::to_string(i) + "]"));
    p.sensitivity = derive_sensitivity(curve, threshold, num_layers);
  }
  if (v.contains("routing_prior")) {
    const json& r = v["routing_prior"];
    if (!r.is_array()) fail(join(path, "routing_prior"), "expected an array of rows");
    for (size_t l = 0; l < r.size(); ++l) {
      const std::string row_path = join(path, "routing_prior") + "[" + std::to_string(l) + "]";
      if (!r[l].is_array()) fail(row_path, "expected an array of numbers");
      std::vector<double> row;
      for (size_t e = 0; e < r[l].size(); ++e)
        row.push_back(as_double(r[l][e], row_path + "[" + std::to_string(e) + "]"));
      p.routing_prior.push_back(std::move(row));
    }
  }
  return p;
}

// weighted draw shared with the request generator: cumulative scan over the
// mix in key order
std::string draw_task(const std::map<std::string, double>& mix, double total, Rng& rng) {
  double u = rng.uniform() * total;
  double acc = 0.0;
  for (const auto& [task, w] : mix) {
    acc += w;
    if (u < acc) return task;
  }
  return mix.rbegin()->first;
}

}  // namespace

const TaskProfile& Scenario::profile(const std::string& task_id) const {
  for (const TaskProfile& p : profiles)
    if (p.task_id == task_id) return p;
  throw ValidationError("tasks: unknown task_id " + task_id);
}

void Scenario::validate() const {
  if (schema_version != kScenarioSchemaVersion)
    throw ValidationError("schema_version: expected " + std::to_string(kScenarioSchemaVersion));
  shape.validate();
  cost.validate();
  engine.validate(shape);
  if (profiles.empty()) throw ValidationError("tasks: must not be empty");
  std::set<std::string> ids;
  for (const TaskProfile& p : profiles) {
    p.validate(shape);
    if (!ids.insert(p.task_id).second)
      throw ValidationError("tasks: duplicate task_id " + p.task_id);
  }
  if (workload.arrival_rate <= 0.0) throw ValidationError("workload.arrival_rate: must be > 0");
  if (workload.duration <= 0.0) throw ValidationError("workload.duration: must be > 0");
  if (workload.tokens_per_prompt < 1)
    throw ValidationError("workload.tokens_per_prompt: must be >= 1");
  if (workload.training_prompts < 0)
    throw ValidationError("workload.training_prompts: must be >= 0");
  if (workload.task_mix.empty()) throw ValidationError("workload.task_mix: must not be empty");
  double total = 0.0;
  for (const auto& [task, w] : workload.task_mix) {
    if (ids.count(task) == 0)
      throw ValidationError("workload.task_mix: unknown task_id " + task);
    if (w < 0.0) throw ValidationError("workload.task_mix: weights must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("workload.task_mix: weights must sum to > 0");

  auto check_lambda = [](const std::optional<double>& v, const char* key) {
    if (v && (*v < 0.0 || *v > 1.0))
      throw ValidationError(std::string("calibration.") + key + ": must be in [0, 1]");
  };
  auto check_target = [](const std::optional<double>& v, const char* key) {
    if (v && (*v <= 0.0 || *v >= 1.0))
      throw ValidationError(std::string("calibration.") + key + ": must be in (0, 1)");
  };
  check_lambda(calibration.layer_lambda, "layer_lambda");
  check_lambda(calibration.prompt_lambda, "prompt_lambda");
  check_target(calibration.target_layer_corr, "target_layer_corr");
  check_target(calibration.target_prompt_corr, "target_prompt_corr");
  if (calibration.layer_lambda && calibration.target_layer_corr)
    throw ValidationError("calibration.layer_lambda: give either a lambda or a target, not both");
  if (calibration.prompt_lambda && calibration.target_prompt_corr)
    throw ValidationError(
        "calibration.prompt_lambda: give either a lambda or a target, not both");
  if (calibration.initial_expert < 0 || calibration.initial_expert >= shape.experts_per_layer)
    throw ValidationError("calibration.initial_expert: out of range");

  if (sweep.modes.empty()) throw ValidationError("sweep.modes: must not be empty");
  if (sweep.budget_fractions.empty())
    throw ValidationError("sweep.budget_fractions: must not be empty");
  if (sweep.invocation_periods.empty())
    throw ValidationError("sweep.invocation_periods: must not be empty");
  if (sweep.arrival_rates.empty()) throw ValidationError("sweep.arrival_rates: must not be empty");
  for (size_t i = 0; i < sweep.budget_fractions.size(); ++i)
    if (sweep.budget_fractions[i] <= 0.0 || sweep.budget_fractions[i] > 1.0)
      throw ValidationError("sweep.budget_fractions[" + std::to_string(i) +
                            "]: must be in (0, 1]");
  for (size_t i = 0; i < sweep.invocation_periods.size(); ++i)
    if (sweep.invocation_periods[i] < 1)
      throw ValidationError("sweep.invocation_periods[" + std::to_string(i) + "]: must be >= 1");
  for (size_t i = 0; i < sweep.arrival_rates.size(); ++i)
    if (sweep.arrival_rates[i] <= 0.0)
      throw ValidationError("sweep.arrival_rates[" + std::to_string(i) + "]: must be > 0");
  if (sensitivity_threshold <= 0.0 || sensitivity_threshold > 1.0)
    throw ValidationError("sensitivity_threshold: must be in (0, 1]");
}

Scenario parse_scenario(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError(origin + ": top level must be an object");

  Scenario sc;
  sc.schema_version = as_int(member(j, "", "schema_version"), "schema_version");
  if (sc.schema_version != kScenarioSchemaVersion)
    throw ValidationError("schema_version: expected " + std::to_string(kScenarioSchemaVersion));

  const json& model = member(j, "", "model");
  if (!model.is_object()) fail("model", "expected an object");
  sc.shape.num_moe_layers = as_int(member(model, "model", "num_moe_layers"),
                                   "model.num_moe_layers");
  sc.shape.experts_per_layer =
      as_int(member(model, "model", "experts_per_layer"), "model.experts_per_layer");
  sc.shape.top_k = as_int(member(model, "model", "top_k"), "model.top_k");
  sc.shape.expert_bytes = as_u64(member(model, "model", "expert_bytes"), "model.expert_bytes");
  sc.shape.base_bytes = opt_u64(model, "model", "base_bytes", 0);

  const json& cost = member(j, "", "cost");
  if (!cost.is_object()) fail("cost", "expected an object");
  sc.cost.per_token_cost = as_double(member(cost, "cost", "per_token_cost"),
                                     "cost.per_token_cost");
  sc.cost.per_expert_transfer =
      as_double(member(cost, "cost", "per_expert_transfer"), "cost.per_expert_transfer");
  sc.cost.hd_bandwidth = as_double(member(cost, "cost", "hd_bandwidth"), "cost.hd_bandwidth");
  sc.cost.predictor_invocation_cost = as_double(
      member(cost, "cost", "predictor_invocation_cost"), "cost.predictor_invocation_cost");
  sc.cost.contention_factor = opt_double(cost, "cost", "contention_factor", 1.0);

  const json& engine = member(j, "", "engine");
  if (!engine.is_object()) fail("engine", "expected an object");
  if (engine.contains("mode")) {
    const std::string mode = as_string(engine["mode"], "engine.mode");
    try {
      sc.engine.mode = mode_from_string(mode);
    } catch (const ValidationError&) {
      fail("engine.mode", "unknown mode " + mode);
    }
  }
  sc.engine.invocation_period = opt_int(engine, "engine", "invocation_period", 40);
  sc.engine.budget_fraction = opt_double(engine, "engine", "budget_fraction", 1.0);
  if (engine.contains("budget_per_layer")) {
    const json& b = engine["budget_per_layer"];
    if (!b.is_array()) fail("engine.budget_per_layer", "expected an array of integers");
    for (size_t i = 0; i < b.size(); ++i)
      sc.engine.budget_per_layer.push_back(
          as_int(b[i], "engine.budget_per_layer[" + std::to_string(i) + "]"));
  }
  sc.engine.token_budget = as_int(member(engine, "engine", "token_budget"),
                                  "engine.token_budget");
  sc.engine.task_aware =
      engine.contains("task_aware") ? as_bool(engine["task_aware"], "engine.task_aware") : true;
  sc.engine.seed = opt_u64(engine, "engine", "seed", 0);

  sc.sensitivity_threshold = opt_double(j, "", "sensitivity_threshold", 0.85);

  const json& tasks = member(j, "", "tasks");
  if (!tasks.is_array() || tasks.empty()) fail("tasks", "expected a non-empty array");
  for (size_t i = 0; i < tasks.size(); ++i)
    sc.profiles.push_back(parse_task(tasks[i], "tasks[" + std::to_string(i) + "]",
                                     sc.sensitivity_threshold, sc.shape.num_moe_layers));

  const json& workload = member(j, "", "workload");
  if (!workload.is_object()) fail("workload", "expected an object");
  sc.workload.arrival_rate = opt_double(workload, "workload", "arrival_rate", 1.0);
  sc.workload.duration = opt_double(workload, "workload", "duration", 60.0);
  sc.workload.tokens_per_prompt = opt_int(workload, "workload", "tokens_per_prompt", 16);
  sc.workload.training_prompts = opt_int(workload, "workload", "training_prompts", 0);
  sc.workload.seed = opt_u64(workload, "workload", "seed", 1);
  if (workload.contains("task_mix")) {
    const json& mix = workload["task_mix"];
    if (!mix.is_object()) fail("workload.task_mix", "expected an object of task weights");
    for (const auto& [task, w] : mix.items())
      sc.workload.task_mix[task] = as_double(w, "workload.task_mix." + task);
  } else {
    for (const TaskProfile& p : sc.profiles) sc.workload.task_mix[p.task_id] = 1.0;
  }

  if (j.contains("calibration")) {
    const json& cal = j["calibration"];
    if (!cal.is_object()) fail("calibration", "expected an object");
    if (cal.contains("layer_lambda"))
      sc.calibration.layer_lambda = as_double(cal["layer_lambda"], "calibration.layer_lambda");
    if (cal.contains("prompt_lambda"))
      sc.calibration.prompt_lambda = as_double(cal["prompt_lambda"], "calibration.prompt_lambda");
    if (cal.contains("target_layer_corr"))
      sc.calibration.target_layer_corr =
          as_double(cal["target_layer_corr"], "calibration.target_layer_corr");
    if (cal.contains("target_prompt_corr"))
      sc.calibration.target_prompt_corr =
          as_double(cal["target_prompt_corr"], "calibration.target_prompt_corr");
    sc.calibration.initial_expert = opt_int(cal, "calibration", "initial_expert", 0);
    sc.calibration.rng_seed = opt_u64(cal, "calibration", "rng_seed", 1);
  }

  if (j.contains("sweep")) {
    const json& sweep = j["sweep"];
    if (!sweep.is_object()) fail("sweep", "expected an object");
    if (sweep.contains("modes")) {
      const json& modes = sweep["modes"];
      if (!modes.is_array()) fail("sweep.modes", "expected an array of mode names");
      for (size_t i = 0; i < modes.size(); ++i) {
        const std::string path = "sweep.modes[" + std::to_string(i) + "]";
        const std::string name = as_string(modes[i], path);
        try {
          sc.sweep.modes.push_back(mode_from_string(name));
        } catch (const ValidationError&) {
          fail(path, "unknown mode " + name);
        }
      }
    }
    auto read_doubles = [&](const char* key, std::vector<double>& out) {
      if (!sweep.contains(key)) return;
      const json& arr = sweep[key];
      const std::string base = std::string("sweep.") + key;
      if (!arr.is_array()) fail(base, "expected an array of numbers");
      for (size_t i = 0; i < arr.size(); ++i)
        out.push_back(as_double(arr[i], base + "[" + std::to_string(i) + "]"));
    };
    read_doubles("budget_fractions", sc.sweep.budget_fractions);
    read_doubles("arrival_rates", sc.sweep.arrival_rates);
    if (sweep.contains("invocation_periods")) {
      const json& arr = sweep["invocation_periods"];
      if (!arr.is_array()) fail("sweep.invocation_periods", "expected an array of integers");
      for (size_t i = 0; i < arr.size(); ++i)
        sc.sweep.invocation_periods.push_back(
            as_int(arr[i], "sweep.invocation_periods[" + std::to_string(i) + "]"));
    }
  }
  // unswept axes default to the configured single value
  if (sc.sweep.modes.empty()) sc.sweep.modes = {sc.engine.mode};
  if (sc.sweep.budget_fractions.empty())
    sc.sweep.budget_fractions = {sc.engine.budget_fraction};
  if (sc.sweep.invocation_periods.empty())
    sc.sweep.invocation_periods = {sc.engine.invocation_period};
  if (sc.sweep.arrival_rates.empty()) sc.sweep.arrival_rates = {sc.workload.arrival_rate};

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::string SweepPoint::key() const {
  std::string k = to_string(mode);
  k += "-phi";
  k += fmt_double(budget_fraction);
  k += "-p";
  k += std::to_string(invocation_period);
  k += "-rate";
  k += fmt_double(arrival_rate);
  return k;
}

std::vector<SweepPoint> expand_sweep(const Scenario& scenario) {
  std::vector<SweepPoint> points;
  for (Mode mode : scenario.sweep.modes)
    for (double phi : scenario.sweep.budget_fractions)
      for (int period : scenario.sweep.invocation_periods)
        for (double rate : scenario.sweep.arrival_rates)
          points.push_back(SweepPoint{mode, phi, period, rate});
  return points;
}

TraceCalibration resolve_calibration(const Scenario& scenario) {
  const CalibrationSpec& spec = scenario.calibration;
  std::ostringstream key;
  key << scenario.shape.num_moe_layers << '/' << scenario.shape.experts_per_layer << '/'
      << scenario.shape.top_k << '/' << spec.rng_seed << '/'
      << spec.layer_lambda.value_or(-1) << '/' << spec.prompt_lambda.value_or(-1) << '/'
      << spec.target_layer_corr.value_or(-1) << '/' << spec.target_prompt_corr.value_or(-1);

  static std::mutex mu;
  static std::map<std::string, std::pair<double, double>> memo;
  double layer_lambda = 0.0, prompt_lambda = 0.0;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = memo.find(key.str());
    if (it != memo.end()) {
      layer_lambda = it->second.first;
      prompt_lambda = it->second.second;
    } else {
      if (spec.layer_lambda) layer_lambda = *spec.layer_lambda;
      else if (spec.target_layer_corr)
        layer_lambda = calibrate_layer_lambda(scenario.shape, *spec.target_layer_corr,
                                              spec.rng_seed);
      if (spec.prompt_lambda) prompt_lambda = *spec.prompt_lambda;
      else if (spec.target_prompt_corr)
        prompt_lambda = calibrate_prompt_lambda(scenario.shape, layer_lambda,
                                                *spec.target_prompt_corr, spec.rng_seed);
      memo[key.str()] = {layer_lambda, prompt_lambda};
    }
  }
  TraceCalibration cal = make_calibration(scenario.shape, layer_lambda, prompt_lambda,
                                          spec.initial_expert, spec.rng_seed);
  cal.target_layer_corr = spec.target_layer_corr.value_or(0.0);
  cal.target_prompt_corr = spec.target_prompt_corr.value_or(0.0);
  return cal;
}

RunInputs build_run_inputs(const Scenario& scenario, const SweepPoint& point) {
  RunInputs in;
  in.shape = scenario.shape;
  in.profiles = scenario.profiles;
  in.cost = scenario.cost;
  in.config = scenario.engine;
  in.config.mode = point.mode;
  in.config.budget_fraction = point.budget_fraction;
  in.config.invocation_period = point.invocation_period;
  in.requests = gen_request_trace(point.arrival_rate, scenario.workload.duration,
                                  scenario.profiles, scenario.workload.task_mix,
                                  scenario.workload.seed);
  TraceCalibration cal = resolve_calibration(scenario);
  const int prompts = scenario.workload.training_prompts + static_cast<int>(in.requests.size());
  in.trace = gen_routing_trace(scenario.shape, cal, prompts,
                               scenario.workload.tokens_per_prompt);
  in.training_prompts = scenario.workload.training_prompts;
  double total = 0.0;
  for (const auto& [task, w] : scenario.workload.task_mix) total += w;
  Rng rng(scenario.workload.seed ^ 0x7472616365ULL);  // independent label stream
  for (int i = 0; i < scenario.workload.training_prompts; ++i)
    in.training_task_ids.push_back(draw_task(scenario.workload.task_mix, total, rng));
  return in;
}

}  // namespace moesim
