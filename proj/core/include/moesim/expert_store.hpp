#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "moesim/cost_model.hpp"
#include "moesim/types.hpp"
#include "moesim/workload.hpp"

namespace moesim {

// Per-layer device-resident expert sets with exact byte accounting.
class Placement {
 public:
  Placement() = default;
  Placement(const ModelShape& shape, std::vector<int> budget_per_layer);

  static Placement full(const ModelShape& shape);               // budgets = E, all resident
  static Placement empty(const ModelShape& shape, std::vector<int> budget_per_layer);

  bool resident(int layer, int expert) const { return resident_[layer][expert] != 0; }
  std::vector<int> residents(int layer) const;  // ascending
  int resident_count(int layer) const { return counts_[layer]; }
  int budget(int layer) const { return budgets_[layer]; }
  const std::vector<int>& budgets() const { return budgets_; }
  const ModelShape& shape() const { return shape_; }

  std::uint64_t expert_bytes_used() const;  // sum |resident_l| * expert_bytes
  std::uint64_t device_bytes_used() const { return shape_.base_bytes + expert_bytes_used(); }

  // single-expert moves; loading past the layer budget or double moves are
  // engine bugs and throw std::logic_error
  void evict(int layer, int expert);
  void load(int layer, int expert);

 private:
  ModelShape shape_;
  std::vector<int> budgets_;
  std::vector<std::vector<char>> resident_;
  std::vector<int> counts_;
};

// Expected tokens per (task, layer, expert) plus the per-layer aggregate.
struct ExpectedTokens {
  std::vector<std::string> task_ids;
  // values[task][layer][expert]
  std::vector<std::vector<std::vector<double>>> values;
  std::vector<std::vector<double>> aggregate;  // [layer][expert]
};

// N_e = (sum of input tokens + T * W_o) * s * f_e per task, where T counts the
// task's running plus incoming requests.  `frequencies` maps task -> per-layer
// routing frequency rows (missing task = uniform); `task_aware` = false treats
// every layer as sensitive.
ExpectedTokens expected_tokens(const ModelShape& shape, const std::vector<TaskProfile>& profiles,
                               const std::vector<Request>& running,
                               const std::vector<Request>& incoming,
                               const std::map<std::string, std::vector<std::vector<double>>>& frequencies,
                               bool task_aware = true);

// Exactly budget[l] experts per layer with the largest aggregate expected
// tokens; ties resolve to the smaller index.
std::vector<std::vector<int>> select_experts(const std::vector<std::vector<double>>& aggregate,
                                             const ModelShape& shape,
                                             const std::vector<int>& budgets);

// Plan targets: a layer whose aggregate row is entirely zero keeps its current
// residents (trimmed to budget, lowest indices kept) so masked layers never
// cause transfers; other layers take select_experts.
std::vector<std::vector<int>> loading_targets(const std::vector<std::vector<double>>& aggregate,
                                              const Placement& current,
                                              const std::vector<int>& budgets);

struct LoadingPlan {
  struct LayerOps {
    int layer = 0;
    std::vector<int> evictions;  // ascending index
    std::vector<int> loads;      // descending expected tokens, ascending index ties
    double duration = 0.0;       // loads * per-expert transfer seconds
  };
  std::vector<LayerOps> layers;  // ascending layer, every layer present
  double delta_e = 0.0;          // total transfer seconds; layers move sequentially
  int total_loads = 0;

  bool empty() const { return total_loads == 0; }
};

// Diff current vs target per layer.  `aggregate` orders the loads.
LoadingPlan plan_loading(const Placement& current,
                         const std::vector<std::vector<int>>& target,
                         const std::vector<std::vector<double>>& aggregate,
                         const CostModel& cost);

// Apply one layer of a plan (evictions first, then loads).
void apply_plan_layer(Placement& placement, const LoadingPlan::LayerOps& ops);
// Apply a whole plan at once (tests / instant-transfer paths).
void apply_plan(Placement& placement, const LoadingPlan& plan);

struct RouteResult {
  int expert = -1;  // expert that serves the token
  int rank = -1;    // index into the gate choices; -1 = fallback to resident
  bool hit = false; // rank-0 choice was resident
};

// Serve a token: first resident gate choice wins; when none is resident the
// token falls back to the resident expert with the highest layer score
// (smallest index on ties; empty scores treat all experts equally).
RouteResult route_token(const std::vector<int>& gate_choice, const Placement& placement,
                        int layer, const std::vector<double>& layer_scores);

}  // namespace moesim
