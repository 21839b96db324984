#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "moesim/distributions.hpp"
#include "moesim/types.hpp"

namespace moesim {

// Per-task serving profile.
struct TaskProfile {
  std::string task_id;                 // stable key, e.g. "qa"
  std::string name;                    // human-readable label
  std::vector<std::string> keywords;   // prompt-text classification hints
  LengthDist input_tokens;
  LengthDist output_tokens;
  double expected_output_tokens = 0.0;  // W_o; <= 0 means "use output_tokens.mean()"
  double slo_ttft = 0.0;                // seconds
  std::vector<int> sensitivity;         // per layer, 1 = routing accuracy matters
  // optional per-layer routing frequency prior, rows sum to 1; empty = uniform
  std::vector<std::vector<double>> routing_prior;

  double wo() const {
    return expected_output_tokens > 0.0 ? expected_output_tokens : output_tokens.mean();
  }
  void validate(const ModelShape& shape) const;
};

// Derive a per-layer 0/1 sensitivity vector from an accuracy curve.
// curve[j] = task output quality when the first j layers route randomly
// (curve[0] is the unperturbed quality).  Layer l is insensitive when quality
// stays at or above `threshold` even with layers 0..l randomized.
std::vector<int> derive_sensitivity(const std::vector<double>& curve, double threshold,
                                    int num_layers);

using Matrix = std::vector<std::vector<double>>;  // row-stochastic, E x E

Matrix identity_matrix(int e);
Matrix uniform_matrix(int e);
// lam * I + (1 - lam) * U
Matrix mixed_matrix(int e, double lam);

// Markov calibration for the routing-trace generator.
struct TraceCalibration {
  std::vector<Matrix> layer_transition;   // m-1 matrices, layer i -> i+1
  std::vector<Matrix> prompt_transition;  // m matrices, prompt n -> n+1 per layer
  double target_layer_corr = 0.0;         // informational once calibrated
  double target_prompt_corr = 0.0;
  int initial_expert = 0;   // stand-in "previous prompt" dominant for prompt 0
  std::uint64_t rng_seed = 0;

  void validate(const ModelShape& shape) const;
};

// Top-k routed experts for every (prompt, layer, token).  experts[p][l][t]
// holds top_k distinct indices; rank 0 is the gate's top choice.
struct RoutingTrace {
  int num_layers = 0;
  int top_k = 0;
  std::vector<std::vector<std::vector<std::vector<int>>>> experts;

  int num_prompts() const { return static_cast<int>(experts.size()); }
  int tokens_per_prompt(int prompt) const {
    return experts[prompt].empty() ? 0 : static_cast<int>(experts[prompt][0].size());
  }
  void validate(const ModelShape& shape) const;
};

// Poisson arrivals over [0, duration); task ids drawn from task_mix, lengths
// and SLOs from the matching profile.  Requests come back in arrival order
// with ids 0..n-1.
std::vector<Request> gen_request_trace(double arrival_rate, double duration,
                                       const std::vector<TaskProfile>& profiles,
                                       const std::map<std::string, double>& task_mix,
                                       std::uint64_t seed);

// Markov-chain routing generator.  Per prompt and layer a seed expert is drawn
// from the prompt-transition row of the previous prompt's dominant expert at
// that layer; every token starts the layer chain at the prompt's layer-0 seed
// and walks layer_transition rows downward.  Ranks 1..k-1 are drawn without
// replacement from the same row (deterministic ascending fill when the row has
// no mass left).
RoutingTrace gen_routing_trace(const ModelShape& shape, const TraceCalibration& cal,
                               int prompts, int tokens_per_prompt);

// Keyword classifier: most case-insensitive keyword occurrences wins, ties go
// to the lexicographically smallest task_id, zero matches to default_task_id.
std::string extract_task_type(const std::string& prompt_text,
                              const std::vector<TaskProfile>& profiles,
                              const std::string& default_task_id);

// lag-0 Pearson correlation; 0 when either side has zero variance
double cross_correlation(const std::vector<int>& a, const std::vector<int>& b);

// modal rank-0 expert of one prompt at one layer (smallest index on ties)
int dominant_expert(const RoutingTrace& trace, int prompt, int layer);

// per-layer expert set of one prompt: up to top_k distinct rank-0 experts by
// descending frequency (ascending index on ties)
std::vector<std::vector<int>> prompt_expert_sets(const RoutingTrace& trace, int prompt);

// mean lag-0 correlation between adjacent layers' rank-0 sequences
double measure_layer_correlation(const RoutingTrace& trace);
// pooled lag-0 correlation between consecutive prompts' per-layer dominant experts
double measure_prompt_correlation(const RoutingTrace& trace);

// Bisect the identity/uniform mixing weight of the transition matrices until a
// probe trace's measured correlation hits the target.
double calibrate_layer_lambda(const ModelShape& shape, double target, std::uint64_t seed);
double calibrate_prompt_lambda(const ModelShape& shape, double layer_lambda, double target,
                               std::uint64_t seed);

TraceCalibration make_calibration(const ModelShape& shape, double layer_lambda,
                                  double prompt_lambda, int initial_expert,
                                  std::uint64_t seed);

}  // namespace moesim
