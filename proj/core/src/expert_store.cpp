#include "moesim/expert_store.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace moesim {

Placement::Placement(const ModelShape& shape, std::vector<int> budget_per_layer)
    : shape_(shape), budgets_(std::move(budget_per_layer)) {
  shape_.validate();
  if (static_cast<int>(budgets_.size()) != shape_.num_moe_layers)
    throw ValidationError("placement.budget_per_layer: must have one entry per layer");
  for (int b : budgets_)
    if (b < 0 || b > shape_.experts_per_layer)
      throw ValidationError("placement.budget_per_layer: entries must be in [0, experts_per_layer]");
  resident_.assign(shape_.num_moe_layers, std::vector<char>(shape_.experts_per_layer, 0));
  counts_.assign(shape_.num_moe_layers, 0);
}

Placement Placement::full(const ModelShape& shape) {
  Placement p(shape, std::vector<int>(shape.num_moe_layers, shape.experts_per_layer));
  for (int l = 0; l < shape.num_moe_layers; ++l)
    for (int e = 0; e < shape.experts_per_layer; ++e) p.load(l, e);
  return p;
}

Placement Placement::empty(const ModelShape& shape, std::vector<int> budget_per_layer) {
  return Placement(shape, std::move(budget_per_layer));
}

std::vector<int> Placement::residents(int layer) const {
  std::vector<int> out;
  out.reserve(counts_[layer]);
  for (int e = 0; e < shape_.experts_per_layer; ++e)
    if (resident_[layer][e]) out.push_back(e);
  return out;
}

std::uint64_t Placement::expert_bytes_used() const {
  std::uint64_t resident_total = 0;
  for (int c : counts_) resident_total += static_cast<std::uint64_t>(c);
  return resident_total * shape_.expert_bytes;
}

void Placement::evict(int layer, int expert) {
  if (!resident_[layer][expert]) throw std::logic_error("placement: evicting non-resident expert");
  resident_[layer][expert] = 0;
  --counts_[layer];
}

void Placement::load(int layer, int expert) {
  if (resident_[layer][expert]) throw std::logic_error("placement: loading resident expert");
  if (counts_[layer] >= budgets_[layer]) throw std::logic_error("placement: layer budget exceeded");
  resident_[layer][expert] = 1;
  ++counts_[layer];
}

ExpectedTokens expected_tokens(const ModelShape& shape, const std::vector<TaskProfile>& profiles,
                               const std::vector<Request>& running,
                               const std::vector<Request>& incoming,
                               const std::map<std::string, std::vector<std::vector<double>>>& frequencies,
                               bool task_aware) {
  const int m = shape.num_moe_layers;
  const int experts = shape.experts_per_layer;

  std::map<std::string, const TaskProfile*> by_id;
  for (const TaskProfile& p : profiles) by_id[p.task_id] = &p;

  // task -> (sum of input tokens, request count), running plus incoming
  std::map<std::string, std::pair<double, int>> load;
  auto absorb = [&](const Request& r) {
    if (by_id.count(r.task_id) == 0)
      throw ValidationError("expected_tokens.request: unknown task_id " + r.task_id);
    auto& entry = load[r.task_id];
    entry.first += static_cast<double>(r.input_tokens);
    entry.second += 1;
  };
  for (const Request& r : running) absorb(r);
  for (const Request& r : incoming) absorb(r);

  ExpectedTokens out;
  out.aggregate.assign(m, std::vector<double>(experts, 0.0));
  for (const auto& [task, wt] : load) {
    const TaskProfile& profile = *by_id.at(task);
    const double volume = wt.first + wt.second * profile.wo();

    std::vector<std::vector<double>> grid(m, std::vector<double>(experts, 0.0));
    auto fit = frequencies.find(task);
    for (int l = 0; l < m; ++l) {
      bool sensitive = task_aware
                           ? (profile.sensitivity.empty() || profile.sensitivity[l] != 0)
                           : true;
      if (!sensitive) continue;
      for (int e = 0; e < experts; ++e) {
        double f = 1.0 / experts;
        if (fit != frequencies.end()) f = fit->second[l][e];
        grid[l][e] = volume * f;
        out.aggregate[l][e] += grid[l][e];
      }
    }
    out.task_ids.push_back(task);
    out.values.push_back(std::move(grid));
  }
  return out;
}

namespace {

// indices ranked by descending score, ascending index on exact ties
std::vector<int> ranked_indices(const std::vector<double>& row) {
  std::vector<int> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<std::vector<int>> select_experts(const std::vector<std::vector<double>>& aggregate,
                                             const ModelShape& shape,
                                             const std::vector<int>& budgets) {
  if (static_cast<int>(aggregate.size()) != shape.num_moe_layers)
    throw ValidationError("select_experts.aggregate: must have one row per layer");
  if (budgets.size() != aggregate.size())
    throw ValidationError("select_experts.budgets: must have one entry per layer");
  std::vector<std::vector<int>> out(aggregate.size());
  for (size_t l = 0; l < aggregate.size(); ++l) {
    if (budgets[l] < 0 || budgets[l] > shape.experts_per_layer)
      throw ValidationError("select_experts.budgets: entries must be in [0, experts_per_layer]");
    std::vector<int> order = ranked_indices(aggregate[l]);
    out[l].assign(order.begin(), order.begin() + budgets[l]);
  }
  return out;
}

std::vector<std::vector<int>> loading_targets(const std::vector<std::vector<double>>& aggregate,
                                              const Placement& current,
                                              const std::vector<int>& budgets) {
  std::vector<std::vector<int>> out = select_experts(aggregate, current.shape(), budgets);
  for (size_t l = 0; l < aggregate.size(); ++l) {
    bool all_zero = true;
    for (double v : aggregate[l])
      if (v != 0.0) {
        all_zero = false;
        break;
      }
    if (!all_zero) continue;
    std::vector<int> keep = current.residents(static_cast<int>(l));
    if (static_cast<int>(keep.size()) > budgets[l]) keep.resize(budgets[l]);
    out[l] = std::move(keep);
  }
  return out;
}

LoadingPlan plan_loading(const Placement& current, const std::vector<std::vector<int>>& target,
                         const std::vector<std::vector<double>>& aggregate,
                         const CostModel& cost) {
  const ModelShape& shape = current.shape();
  if (static_cast<int>(target.size()) != shape.num_moe_layers)
    throw ValidationError("plan_loading.target: must have one set per layer");
  const double per_expert = cost.expert_transfer_seconds(shape.expert_bytes);

  LoadingPlan plan;
  plan.layers.reserve(target.size());
  for (int l = 0; l < shape.num_moe_layers; ++l) {
    if (static_cast<int>(target[l].size()) > current.budget(l))
      throw ValidationError("plan_loading.target: exceeds layer budget");
    std::vector<char> wanted(shape.experts_per_layer, 0);
    for (int e : target[l]) {
      if (e < 0 || e >= shape.experts_per_layer)
        throw ValidationError("plan_loading.target: expert index out of range");
      if (wanted[e]) throw ValidationError("plan_loading.target: duplicate expert index");
      wanted[e] = 1;
    }

    LoadingPlan::LayerOps ops;
    ops.layer = l;
    for (int e : current.residents(l))
      if (!wanted[e]) ops.evictions.push_back(e);
    std::vector<int> order = l < static_cast<int>(aggregate.size())
                                 ? ranked_indices(aggregate[l])
                                 : ranked_indices(std::vector<double>(shape.experts_per_layer, 0.0));
    for (int e : order)
      if (wanted[e] && !current.resident(l, e)) ops.loads.push_back(e);
    ops.duration = static_cast<double>(ops.loads.size()) * per_expert;
    plan.delta_e += ops.duration;
    plan.total_loads += static_cast<int>(ops.loads.size());
    plan.layers.push_back(std::move(ops));
  }
  return plan;
}

void apply_plan_layer(Placement& placement, const LoadingPlan::LayerOps& ops) {
  for (int e : ops.evictions) placement.evict(ops.layer, e);
  for (int e : ops.loads) placement.load(ops.layer, e);
}

void apply_plan(Placement& placement, const LoadingPlan& plan) {
  for (const auto& ops : plan.layers) apply_plan_layer(placement, ops);
}

RouteResult route_token(const std::vector<int>& gate_choice, const Placement& placement,
                        int layer, const std::vector<double>& layer_scores) {
  for (size_t rank = 0; rank < gate_choice.size(); ++rank) {
    if (placement.resident(layer, gate_choice[rank]))
      return {gate_choice[rank], static_cast<int>(rank), rank == 0};
  }
  std::vector<int> residents = placement.residents(layer);
  if (residents.empty()) throw std::logic_error("route_token: no resident experts at layer");
  int best = residents[0];
  if (!layer_scores.empty()) {
    for (int e : residents)
      if (layer_scores[e] > layer_scores[best]) best = e;
  }
  return {best, -1, false};
}

}  // namespace moesim
