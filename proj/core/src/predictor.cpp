#include "moesim/predictor.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace moesim {

namespace {

std::vector<double> smoothed(const std::vector<double>& counts, double smoothing) {
  const int e = static_cast<int>(counts.size());
  double sum = std::accumulate(counts.begin(), counts.end(), 0.0);
  double denom = sum + smoothing * e;
  std::vector<double> row(e);
  if (denom <= 0.0) {
    std::fill(row.begin(), row.end(), 1.0 / e);
    return row;
  }
  for (int j = 0; j < e; ++j) row[j] = (counts[j] + smoothing) / denom;
  return row;
}

// Rank by score descending, ascending index on ties.  Scores within a small
// relative band of a group's leader count as tied, so overwhelming smoothing
// collapses to the pure index order at finite pseudo-counts.  Grouping by
// leader keeps the ordering transitive (a partition, not pairwise epsilons).
LayerPrediction rank_scores(std::vector<double> scores, int k) {
  const int e = static_cast<int>(scores.size());
  std::vector<int> order(e);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<int> ranked;
  ranked.reserve(e);
  size_t group_start = 0;
  double leader = e > 0 ? scores[order[0]] : 0.0;
  for (size_t i = 0; i <= order.size(); ++i) {
    bool close_group =
        i == order.size() || leader - scores[order[i]] > 1e-12 + 1e-3 * std::fabs(leader);
    if (close_group) {
      std::sort(order.begin() + group_start, order.begin() + i);
      ranked.insert(ranked.end(), order.begin() + group_start, order.begin() + i);
      if (i < order.size()) {
        group_start = i;
        leader = scores[order[i]];
      }
    }
  }
  LayerPrediction out;
  out.experts.assign(ranked.begin(), ranked.begin() + std::min(k, e));
  out.scores = std::move(scores);
  return out;
}

std::vector<double> mean_rows(const TransitionModel& model, const std::vector<int>& from,
                              bool prompt_rows, int layer, const char* field) {
  if (from.empty()) throw ValidationError(std::string(field) + ": empty expert set");
  std::vector<double> scores(model.num_experts, 0.0);
  for (int e : from) {
    if (e < 0 || e >= model.num_experts)
      throw ValidationError(std::string(field) + ": expert index out of range");
    std::vector<double> row = prompt_rows ? model.prompt_row(layer, e) : model.layer_row(layer, e);
    for (int j = 0; j < model.num_experts; ++j) scores[j] += row[j];
  }
  for (double& s : scores) s /= static_cast<double>(from.size());
  return scores;
}

void check_matrix_list(const std::vector<Matrix>& ms, size_t expected, int e, const char* field) {
  if (ms.size() != expected)
    throw ValidationError(std::string(field) + ": wrong matrix count");
  for (const Matrix& m : ms) {
    if (static_cast<int>(m.size()) != e)
      throw ValidationError(std::string(field) + ": wrong matrix size");
    for (const auto& row : m) {
      if (static_cast<int>(row.size()) != e)
        throw ValidationError(std::string(field) + ": wrong row size");
      for (double v : row)
        if (v < 0.0) throw ValidationError(std::string(field) + ": negative count");
    }
  }
}

}  // namespace

std::vector<double> TransitionModel::layer_row(int layer, int from_expert) const {
  if (layer < 0 || layer >= num_layers - 1)
    throw ValidationError("predictor.layer_row: layer out of range");
  if (from_expert < 0 || from_expert >= num_experts)
    throw ValidationError("predictor.layer_row: expert out of range");
  return smoothed(layer_counts[layer][from_expert], smoothing);
}

std::vector<double> TransitionModel::prompt_row(int layer, int from_expert) const {
  if (layer < 0 || layer >= num_layers)
    throw ValidationError("predictor.prompt_row: layer out of range");
  if (from_expert < 0 || from_expert >= num_experts)
    throw ValidationError("predictor.prompt_row: expert out of range");
  return smoothed(prompt_counts[layer][from_expert], smoothing);
}

void TransitionModel::validate() const {
  if (num_layers < 1) throw ValidationError("predictor.num_layers: must be >= 1");
  if (num_experts < 1) throw ValidationError("predictor.num_experts: must be >= 1");
  if (top_k < 1 || top_k > num_experts)
    throw ValidationError("predictor.top_k: must be in [1, num_experts]");
  if (smoothing < 0.0) throw ValidationError("predictor.smoothing: must be >= 0");
  check_matrix_list(layer_counts, static_cast<size_t>(num_layers - 1), num_experts,
                    "predictor.layer_counts");
  check_matrix_list(prompt_counts, static_cast<size_t>(num_layers), num_experts,
                    "predictor.prompt_counts");
  for (const auto& [task, rows] : task_token_counts) {
    if (static_cast<int>(rows.size()) != num_layers)
      throw ValidationError("predictor.per_task_frequency." + task + ": wrong layer count");
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != num_experts)
        throw ValidationError("predictor.per_task_frequency." + task + ": wrong row size");
      for (double v : row)
        if (v < 0.0)
          throw ValidationError("predictor.per_task_frequency." + task + ": negative count");
    }
  }
  // smoothed rows must be proper distributions
  for (int l = 0; l + 1 < num_layers; ++l) {
    std::vector<double> row = layer_row(l, 0);
    double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-9)
      throw ValidationError("predictor.layer_counts: smoothed row does not sum to 1");
  }
}

TransitionModel fit(const RoutingTrace& trace, const std::vector<std::string>& task_ids,
                    double smoothing, int num_experts) {
  const int prompts = trace.num_prompts();
  if (prompts == 0 || trace.num_layers < 1) throw ValidationError("predictor.trace: empty");
  if (!task_ids.empty() && static_cast<int>(task_ids.size()) != prompts)
    throw ValidationError("predictor.task_ids: size must match prompt count");

  int experts = num_experts;
  if (experts <= 0) {
    for (const auto& prompt : trace.experts)
      for (const auto& layer : prompt)
        for (const auto& token : layer)
          for (int e : token) experts = std::max(experts, e + 1);
  }
  if (experts < 1) throw ValidationError("predictor.trace: no experts");

  TransitionModel model;
  model.num_layers = trace.num_layers;
  model.num_experts = experts;
  model.top_k = trace.top_k;
  model.smoothing = smoothing;
  model.layer_counts.assign(trace.num_layers - 1, Matrix(experts, std::vector<double>(experts, 0.0)));
  model.prompt_counts.assign(trace.num_layers, Matrix(experts, std::vector<double>(experts, 0.0)));

  for (int p = 0; p < prompts; ++p) {
    const auto& prompt = trace.experts[p];
    const int tokens = trace.tokens_per_prompt(p);
    for (int l = 0; l + 1 < trace.num_layers; ++l)
      for (int t = 0; t < tokens; ++t)
        model.layer_counts[l][prompt[l][t][0]][prompt[l + 1][t][0]] += 1.0;
    if (!task_ids.empty()) {
      auto& rows = model.task_token_counts[task_ids[p]];
      if (rows.empty()) rows.assign(trace.num_layers, std::vector<double>(experts, 0.0));
      for (int l = 0; l < trace.num_layers; ++l)
        for (int t = 0; t < tokens; ++t)
          for (int e : prompt[l][t]) rows[l][e] += 1.0;
    }
  }

  for (int p = 0; p + 1 < prompts; ++p) {
    if (trace.tokens_per_prompt(p) == 0 || trace.tokens_per_prompt(p + 1) == 0) continue;
    for (int l = 0; l < trace.num_layers; ++l) {
      int a = dominant_expert(trace, p, l);
      int b = dominant_expert(trace, p + 1, l);
      model.prompt_counts[l][a][b] += 1.0;
    }
  }
  return model;
}

LayerPrediction predict_layerwise(const TransitionModel& model,
                                  const std::vector<int>& prev_layer_experts, int layer) {
  if (layer < 1 || layer >= model.num_layers)
    throw ValidationError("predictor.layer: must be in [1, num_layers)");
  return rank_scores(mean_rows(model, prev_layer_experts, false, layer - 1, "predictor.prev_experts"),
                     model.top_k);
}

Prediction predict_all_layers(const TransitionModel& model,
                              const std::vector<std::vector<int>>& prev_prompt_experts) {
  if (static_cast<int>(prev_prompt_experts.size()) != model.num_layers)
    throw ValidationError("predictor.prev_prompt: layer count mismatch");
  Prediction out;
  out.layers.reserve(model.num_layers);
  for (int l = 0; l < model.num_layers; ++l)
    out.layers.push_back(
        rank_scores(mean_rows(model, prev_prompt_experts[l], true, l, "predictor.prev_prompt"),
                    model.top_k));
  return out;
}

Prediction predict_chained(const TransitionModel& model,
                           const std::vector<int>& prev_prompt_layer0) {
  Prediction out;
  out.layers.reserve(model.num_layers);
  out.layers.push_back(
      rank_scores(mean_rows(model, prev_prompt_layer0, true, 0, "predictor.prev_prompt"),
                  model.top_k));
  for (int l = 1; l < model.num_layers; ++l)
    out.layers.push_back(rank_scores(
        mean_rows(model, out.layers[l - 1].experts, false, l - 1, "predictor.prev_experts"),
        model.top_k));
  return out;
}

std::vector<std::vector<double>> predicted_frequencies(const TransitionModel& model,
                                                       const std::string& task_id) {
  std::vector<std::vector<double>> raw(model.num_layers,
                                       std::vector<double>(model.num_experts, 0.0));
  auto it = model.task_token_counts.find(task_id);
  if (it != model.task_token_counts.end()) {
    raw = it->second;
  } else {
    for (const auto& [task, rows] : model.task_token_counts)
      for (int l = 0; l < model.num_layers; ++l)
        for (int e = 0; e < model.num_experts; ++e) raw[l][e] += rows[l][e];
  }
  std::vector<std::vector<double>> out;
  out.reserve(model.num_layers);
  for (const auto& row : raw) out.push_back(smoothed(row, model.smoothing));
  return out;
}

void save_model(const TransitionModel& model, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["num_layers"] = model.num_layers;
  j["num_experts"] = model.num_experts;
  j["top_k"] = model.top_k;
  j["smoothing"] = model.smoothing;
  j["layer_counts"] = model.layer_counts;
  j["prompt_counts"] = model.prompt_counts;
  j["task_token_counts"] = model.task_token_counts;
  std::ofstream out(path);
  if (!out) throw ValidationError("model file: cannot write " + path);
  out << j.dump(2) << "\n";
}

TransitionModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model file: cannot read " + path);
  TransitionModel model;
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    model.num_layers = j.at("num_layers").get<int>();
    model.num_experts = j.at("num_experts").get<int>();
    model.top_k = j.at("top_k").get<int>();
    model.smoothing = j.at("smoothing").get<double>();
    model.layer_counts = j.at("layer_counts").get<std::vector<Matrix>>();
    model.prompt_counts = j.at("prompt_counts").get<std::vector<Matrix>>();
    model.task_token_counts =
        j.at("task_token_counts").get<std::map<std::string, std::vector<std::vector<double>>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file: " + std::string(e.what()));
  }
  model.validate();
  return model;
}

}  // namespace moesim
