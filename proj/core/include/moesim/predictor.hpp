#pragma once

#include <map>
#include <string>
#include <vector>

#include "moesim/types.hpp"
#include "moesim/workload.hpp"

namespace moesim {

// Ranked experts for one layer plus the score vector that produced them.
struct LayerPrediction {
  std::vector<int> experts;    // top_k indices, score-desc, ascending index on ties
  std::vector<double> scores;  // length E
};

struct Prediction {
  std::vector<LayerPrediction> layers;  // one entry per MoE layer
};

// First-order expert-transition statistics with additive smoothing.  Raw
// tallies are kept so fits can be merged/inspected; probability rows apply
// (count + smoothing) / (row_sum + smoothing * E).
struct TransitionModel {
  int num_layers = 0;
  int num_experts = 0;
  int top_k = 0;
  double smoothing = 0.01;
  std::vector<Matrix> layer_counts;   // m-1 matrices: layer i rank-0 -> layer i+1 rank-0
  std::vector<Matrix> prompt_counts;  // m matrices: prompt n dominant -> n+1 dominant
  // task -> [layer][expert] rank-0 token tallies
  std::map<std::string, std::vector<std::vector<double>>> task_token_counts;

  std::vector<double> layer_row(int layer, int from_expert) const;
  std::vector<double> prompt_row(int layer, int from_expert) const;
  void validate() const;
};

// Tally a routing trace.  task_ids labels each prompt (empty = skip per-task
// frequency tallies); otherwise its size must equal the prompt count.
// num_experts <= 0 infers the expert count from the largest index seen.
TransitionModel fit(const RoutingTrace& trace, const std::vector<std::string>& task_ids,
                    double smoothing = 0.01, int num_experts = 0);

// Score layer `layer` (1 <= layer < m) from the experts active at layer-1:
// the score vector is the mean of their smoothed layer-transition rows.
LayerPrediction predict_layerwise(const TransitionModel& model,
                                  const std::vector<int>& prev_layer_experts, int layer);

// Score every layer independently from the previous prompt's per-layer expert
// sets via the prompt-transition rows.
Prediction predict_all_layers(const TransitionModel& model,
                              const std::vector<std::vector<int>>& prev_prompt_experts);

// Chained layerwise prediction for a whole prompt: layer 0 comes from the
// previous prompt's layer-0 experts (prompt-transition rows), each deeper
// layer from the predicted experts one layer up.
Prediction predict_chained(const TransitionModel& model,
                           const std::vector<int>& prev_prompt_layer0);

// Smoothed per-layer routing frequency for a task; rows sum to 1.  Unseen
// tasks fall back to the aggregate over all fitted tasks.
std::vector<std::vector<double>> predicted_frequencies(const TransitionModel& model,
                                                       const std::string& task_id);

// structured-text (JSON) round trip
void save_model(const TransitionModel& model, const std::string& path);
TransitionModel load_model(const std::string& path);

}  // namespace moesim
