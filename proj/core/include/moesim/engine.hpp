#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moesim/cost_model.hpp"
#include "moesim/expert_store.hpp"
#include "moesim/predictor.hpp"
#include "moesim/scheduler.hpp"
#include "moesim/types.hpp"
#include "moesim/workload.hpp"

namespace moesim {

// Expert-management policy of a run.
//   baseline  all experts resident, no transfers
//   dynamic   per-iteration on-demand transfers of each layer's needed experts
//   random    periodic placement from uniformly sampled expert sets
//   emoe_a    periodic all-layer prediction from the previous prompt
//   emoe_l    periodic chained layerwise prediction
//   emoe_e    all-layer prediction on every prompt, on the critical path
enum class Mode { baseline, dynamic, random, emoe_a, emoe_l, emoe_e };

Mode mode_from_string(const std::string& s);
const char* to_string(Mode m);
bool mode_uses_predictor(Mode m);

struct EngineConfig {
  Mode mode = Mode::baseline;
  int invocation_period = 40;         // p: prompts between predictor calls
  double budget_fraction = 1.0;       // phi: uniform per-layer device budget
  std::vector<int> budget_per_layer;  // optional override, size m
  int token_budget = 0;               // T_max for the scheduler
  bool task_aware = true;             // sensitivity masking in expected tokens
  std::uint64_t seed = 0;

  std::vector<int> budgets(const ModelShape& shape) const;
  void validate(const ModelShape& shape) const;
};

// One simulation event.  Numeric payload fields a/b are event-specific:
//   arrival         a=slo_ttft b=input_tokens detail=task_id
//   admit           a=expected total latency
//   defer           detail=reason
//   first_token     (time - arrival = observed TTFT)
//   complete        a=generated tokens
//   unserved        request left waiting at end of run
//   iteration       a=elapsed seconds b=tokens processed (prefill + one per request)
//   routing         a=rank-0 hits b=routing decisions (one record per iteration)
//   predictor_fire  a=prompt index
//   predictor_done  a=busy seconds
//   plan            a=delta_e seconds b=total loads
//   load_start      layer, b=loads in layer
//   load_complete   layer, a=layer transfer seconds
struct EventRecord {
  double time = 0.0;
  std::string event;
  std::int64_t request_id = -1;
  int layer = -1;
  double a = 0.0;
  double b = 0.0;
  std::string detail;
};

struct PlacementSnapshot {
  double time = 0.0;
  int invocation = -1;  // -1 = initial state
  int layer = 0;
  std::vector<int> residents;
  std::uint64_t layer_bytes = 0;
};

struct MemorySample {
  double time = 0.0;
  std::uint64_t total_bytes = 0;
  std::uint64_t expert_bytes = 0;
};

struct InvocationRecord {
  int index = 0;            // 0-based invocation counter
  std::int64_t prompt = 0;  // arrival index that triggered it
  double fire_time = 0.0;
  double delta_e = 0.0;     // planned transfer seconds
  int loads = 0;
};

struct RequestOutcome {
  std::uint64_t request_id = 0;
  std::string task_id;
  double arrival = 0.0;
  double admit_time = -1.0;
  double first_token_time = -1.0;
  double completion_time = -1.0;
  int input_tokens = 0;
  int generated_tokens = 0;
  double slo_ttft = 0.0;
  bool served = false;
  bool slo_violated = false;  // served and TTFT above slo_ttft
  double latency() const { return served ? completion_time - arrival : -1.0; }
  double ttft() const { return first_token_time >= 0.0 ? first_token_time - arrival : -1.0; }
};

struct Metrics {
  int requests = 0;
  int served = 0;
  int unserved = 0;
  std::uint64_t total_tokens = 0;      // generated tokens (one per request per iteration)
  std::uint64_t generated_tokens = 0;  // same accounting, kept for conservation checks
  double makespan = 0.0;               // virtual time of the last event
  double latency_mean = 0.0;
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;
  double ttft_p50 = 0.0;
  double ttft_p90 = 0.0;
  double throughput = 0.0;             // total_tokens / makespan
  std::uint64_t routing_decisions = 0;
  std::uint64_t routing_hits = 0;
  double hit_rate = 0.0;               // rank-0 resident fraction
  int slo_violations = 0;
  double predictor_busy_seconds = 0.0;
  double transfer_seconds = 0.0;       // sum of planned delta_e
  std::uint64_t peak_memory_bytes = 0;
  std::uint64_t steady_expert_bytes = 0;  // expert bytes after the last change
  std::vector<RequestOutcome> outcomes;   // by request_id
};

struct RunInputs {
  ModelShape shape;
  std::vector<TaskProfile> profiles;
  CostModel cost;
  EngineConfig config;
  std::vector<Request> requests;  // arrival order
  RoutingTrace trace;             // training prompts followed by serving prompts
  int training_prompts = 0;       // leading slice used to fit the predictor
  std::vector<std::string> training_task_ids;  // labels for the training slice

  void validate() const;
};

struct RunResult {
  Metrics metrics;
  std::vector<EventRecord> events;
  std::vector<PlacementSnapshot> snapshots;
  std::vector<MemorySample> memory;
  std::vector<InvocationRecord> invocations;
};

// Discrete-event run over the request trace.  Deterministic for fixed inputs.
RunResult run(const RunInputs& inputs);

// Aggregate a run's event log + memory timeline into Metrics.
Metrics collect_metrics(const std::vector<EventRecord>& events,
                        const std::vector<MemorySample>& memory);

// nearest-rank percentile (q in [0,1]) of an unsorted sample; 0 when empty
double percentile(std::vector<double> values, double q);

}  // namespace moesim
