#include "moesim/types.hpp"

#include "moesim/cost_model.hpp"

namespace moesim {

void CostModel::validate() const {
  if (per_token_cost <= 0.0) throw ValidationError("cost.per_token_cost: must be > 0");
  if (per_expert_transfer <= 0.0) throw ValidationError("cost.per_expert_transfer: must be > 0");
  if (hd_bandwidth <= 0.0) throw ValidationError("cost.hd_bandwidth: must be > 0");
  if (predictor_invocation_cost <= 0.0)
    throw ValidationError("cost.predictor_invocation_cost: must be > 0");
  if (contention_factor < 1.0) throw ValidationError("cost.contention_factor: must be >= 1");
}

void ModelShape::validate() const {
  if (num_moe_layers < 1) throw ValidationError("model.num_moe_layers: must be >= 1");
  if (experts_per_layer < 1) throw ValidationError("model.experts_per_layer: must be >= 1");
  if (top_k < 1) throw ValidationError("model.top_k: must be >= 1");
  if (top_k > experts_per_layer)
    throw ValidationError("model.top_k: must be <= model.experts_per_layer");
  if (expert_bytes == 0) throw ValidationError("model.expert_bytes: must be > 0");
}

const char* to_string(RequestState s) {
  switch (s) {
    case RequestState::waiting: return "waiting";
    case RequestState::scheduled: return "scheduled";
    case RequestState::running: return "running";
    case RequestState::completed: return "completed";
  }
  return "unknown";
}

}  // namespace moesim
