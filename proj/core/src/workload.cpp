#include "moesim/workload.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>

namespace moesim {

namespace {

void validate_stochastic(const Matrix& mat, int e, const std::string& field) {
  if (static_cast<int>(mat.size()) != e)
    throw ValidationError(field + ": expected " + std::to_string(e) + " rows");
  for (int r = 0; r < e; ++r) {
    if (static_cast<int>(mat[r].size()) != e)
      throw ValidationError(field + ": row " + std::to_string(r) + " has wrong width");
    double sum = 0.0;
    for (double v : mat[r]) {
      if (v < 0.0)
        throw ValidationError(field + ": row " + std::to_string(r) + " has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError(field + ": row " + std::to_string(r) + " does not sum to 1");
  }
}

// inverse-CDF draw from a probability row
int sample_row(const std::vector<double>& row, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(row.size()); ++i) {
    acc += row[i];
    if (u < acc) return i;
  }
  // numerical slack: fall back to the last positive entry
  for (int i = static_cast<int>(row.size()) - 1; i >= 0; --i)
    if (row[i] > 0.0) return i;
  return static_cast<int>(row.size()) - 1;
}

// rank-0 plus k-1 distinct draws (without replacement) from the same row;
// ascending-index fill once the row runs out of mass, so degenerate rows stay
// deterministic for any seed
std::vector<int> sample_topk(const std::vector<double>& row, int top1, int k, Rng& rng) {
  std::vector<int> picks{top1};
  std::vector<double> rest(row);
  rest[top1] = 0.0;
  while (static_cast<int>(picks.size()) < k) {
    const double total = std::accumulate(rest.begin(), rest.end(), 0.0);
    if (total <= 1e-12) {
      for (int e = 0; static_cast<int>(picks.size()) < k; ++e) {
        if (std::find(picks.begin(), picks.end(), e) == picks.end()) picks.push_back(e);
      }
      break;
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int chosen = -1;
    for (int e = 0; e < static_cast<int>(rest.size()); ++e) {
      acc += rest[e];
      if (u < acc) {
        chosen = e;
        break;
      }
    }
    if (chosen < 0) {
      for (int e = static_cast<int>(rest.size()) - 1; e >= 0; --e)
        if (rest[e] > 0.0) {
          chosen = e;
          break;
        }
    }
    picks.push_back(chosen);
    rest[chosen] = 0.0;
  }
  return picks;
}

}  // namespace

std::vector<int> derive_sensitivity(const std::vector<double>& curve, double threshold,
                                    int num_layers) {
  if (static_cast<int>(curve.size()) != num_layers + 1)
    throw ValidationError("accuracy_curve: expected num_moe_layers + 1 points");
  std::vector<int> s(num_layers, 1);
  for (int l = 0; l < num_layers; ++l) s[l] = curve[l + 1] >= threshold ? 0 : 1;
  return s;
}

Matrix identity_matrix(int e) {
  Matrix m(e, std::vector<double>(e, 0.0));
  for (int i = 0; i < e; ++i) m[i][i] = 1.0;
  return m;
}

Matrix uniform_matrix(int e) {
  return Matrix(e, std::vector<double>(e, 1.0 / static_cast<double>(e)));
}

Matrix mixed_matrix(int e, double lam) {
  Matrix m(e, std::vector<double>(e, (1.0 - lam) / static_cast<double>(e)));
  for (int i = 0; i < e; ++i) m[i][i] += lam;
  return m;
}

void TaskProfile::validate(const ModelShape& shape) const {
  if (task_id.empty()) throw ValidationError("tasks[].task_id: must not be empty");
  const std::string base = "tasks[" + task_id + "]";
  input_tokens.validate(base + ".input_tokens");
  output_tokens.validate(base + ".output_tokens");
  if (slo_ttft <= 0.0) throw ValidationError(base + ".slo_ttft: must be > 0");
  if (!sensitivity.empty()) {
    if (static_cast<int>(sensitivity.size()) != shape.num_moe_layers)
      throw ValidationError(base + ".sensitivity: expected one flag per MoE layer");
    for (int v : sensitivity)
      if (v != 0 && v != 1) throw ValidationError(base + ".sensitivity: entries must be 0 or 1");
  }
  if (!routing_prior.empty()) {
    if (static_cast<int>(routing_prior.size()) != shape.num_moe_layers)
      throw ValidationError(base + ".routing_prior: expected one row per MoE layer");
    for (int l = 0; l < shape.num_moe_layers; ++l) {
      const auto& row = routing_prior[l];
      if (static_cast<int>(row.size()) != shape.experts_per_layer)
        throw ValidationError(base + ".routing_prior: row " + std::to_string(l) +
                              " has wrong width");
      double sum = 0.0;
      for (double v : row) {
        if (v < 0.0)
          throw ValidationError(base + ".routing_prior: row " + std::to_string(l) +
                                " has a negative entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError(base + ".routing_prior: row " + std::to_string(l) +
                              " does not sum to 1");
    }
  }
}

void TraceCalibration::validate(const ModelShape& shape) const {
  const int e = shape.experts_per_layer;
  if (static_cast<int>(layer_transition.size()) != shape.num_moe_layers - 1)
    throw ValidationError("calibration.layer_transition: expected m-1 matrices");
  if (static_cast<int>(prompt_transition.size()) != shape.num_moe_layers)
    throw ValidationError("calibration.prompt_transition: expected m matrices");
  for (int i = 0; i < static_cast<int>(layer_transition.size()); ++i)
    validate_stochastic(layer_transition[i], e,
                        "calibration.layer_transition[" + std::to_string(i) + "]");
  for (int i = 0; i < static_cast<int>(prompt_transition.size()); ++i)
    validate_stochastic(prompt_transition[i], e,
                        "calibration.prompt_transition[" + std::to_string(i) + "]");
  if (initial_expert < 0 || initial_expert >= e)
    throw ValidationError("calibration.initial_expert: out of range");
}

void RoutingTrace::validate(const ModelShape& shape) const {
  if (num_layers != shape.num_moe_layers)
    throw ValidationError("trace.num_layers: does not match model");
  if (top_k != shape.top_k) throw ValidationError("trace.top_k: does not match model");
  for (int p = 0; p < num_prompts(); ++p) {
    if (static_cast<int>(experts[p].size()) != num_layers)
      throw ValidationError("trace: prompt " + std::to_string(p) + " has wrong layer count");
    const int tokens = tokens_per_prompt(p);
    for (int l = 0; l < num_layers; ++l) {
      if (static_cast<int>(experts[p][l].size()) != tokens)
        throw ValidationError("trace: prompt " + std::to_string(p) +
                              " has uneven token counts across layers");
      for (const auto& choice : experts[p][l]) {
        if (static_cast<int>(choice.size()) != top_k)
          throw ValidationError("trace: prompt " + std::to_string(p) +
                                " has a token without top_k experts");
        for (int idx : choice)
          if (idx < 0 || idx >= shape.experts_per_layer)
            throw ValidationError("trace: expert index out of range in prompt " +
                                  std::to_string(p));
        for (size_t i = 0; i < choice.size(); ++i)
          for (size_t j = i + 1; j < choice.size(); ++j)
            if (choice[i] == choice[j])
              throw ValidationError("trace: duplicate expert in one token's choice set");
      }
    }
  }
}

std::vector<Request> gen_request_trace(double arrival_rate, double duration,
                                       const std::vector<TaskProfile>& profiles,
                                       const std::map<std::string, double>& task_mix,
                                       std::uint64_t seed) {
  if (arrival_rate <= 0.0) throw ValidationError("workload.arrival_rate: must be > 0");
  if (duration <= 0.0) throw ValidationError("workload.duration: must be > 0");
  if (profiles.empty()) throw ValidationError("tasks: at least one profile required");

  std::map<std::string, const TaskProfile*> by_id;
  for (const auto& p : profiles) by_id[p.task_id] = &p;

  double mix_sum = 0.0;
  for (const auto& [task, w] : task_mix) {
    if (!by_id.count(task))
      throw ValidationError("workload.task_mix." + task + ": unknown task_id");
    if (w < 0.0) throw ValidationError("workload.task_mix." + task + ": weight must be >= 0");
    mix_sum += w;
  }
  if (task_mix.empty() || mix_sum <= 0.0)
    throw ValidationError("workload.task_mix: weights must sum to > 0");

  Rng rng(seed);
  std::vector<Request> out;
  double t = 0.0;
  std::uint64_t id = 0;
  while (true) {
    t += rng.exponential(arrival_rate);
    if (t >= duration) break;
    // categorical task draw in key order
    const double u = rng.uniform() * mix_sum;
    double acc = 0.0;
    const TaskProfile* prof = by_id.begin()->second;
    for (const auto& [task, w] : task_mix) {
      acc += w;
      if (u < acc) {
        prof = by_id.at(task);
        break;
      }
    }
    Request r;
    r.request_id = id++;
    r.arrival_time = t;
    r.task_id = prof->task_id;
    r.input_tokens = prof->input_tokens.sample(rng);
    r.slo_ttft = prof->slo_ttft;
    r.target_output_tokens = prof->output_tokens.sample(rng);
    r.initial_gen_estimate = static_cast<int>(std::lround(prof->wo()));
    r.remaining_gen_estimate = r.initial_gen_estimate;
    r.state = RequestState::waiting;
    out.push_back(std::move(r));
  }
  return out;
}

RoutingTrace gen_routing_trace(const ModelShape& shape, const TraceCalibration& cal,
                               int prompts, int tokens_per_prompt) {
  shape.validate();
  cal.validate(shape);
  if (prompts < 1) throw ValidationError("gen_routing_trace: prompts must be >= 1");
  if (tokens_per_prompt < 1)
    throw ValidationError("gen_routing_trace: tokens_per_prompt must be >= 1");

  const int m = shape.num_moe_layers;
  const int k = shape.top_k;
  Rng rng(cal.rng_seed);

  RoutingTrace trace;
  trace.num_layers = m;
  trace.top_k = k;
  trace.experts.resize(prompts);

  // cross-prompt chain anchors at layer 0: each prompt's layer-0 seed is drawn
  // from the prompt-transition row of the previous prompt's layer-0 dominant
  int prev_dominant0 = cal.initial_expert;
  for (int p = 0; p < prompts; ++p) {
    auto& prompt = trace.experts[p];
    prompt.assign(m, std::vector<std::vector<int>>(tokens_per_prompt));

    const auto& seed_row = cal.prompt_transition[0][prev_dominant0];
    const int seed = sample_row(seed_row, rng);

    std::vector<int> layer0_count(shape.experts_per_layer, 0);
    for (int t = 0; t < tokens_per_prompt; ++t) {
      int cur = seed;  // every token starts the layer walk at the prompt seed
      prompt[0][t] = sample_topk(seed_row, cur, k, rng);
      ++layer0_count[cur];
      for (int l = 1; l < m; ++l) {
        const auto& row = cal.layer_transition[l - 1][cur];
        cur = sample_row(row, rng);
        prompt[l][t] = sample_topk(row, cur, k, rng);
      }
    }
    int best = 0;
    for (int e = 1; e < shape.experts_per_layer; ++e)
      if (layer0_count[e] > layer0_count[best]) best = e;
    prev_dominant0 = best;
  }
  return trace;
}

std::string extract_task_type(const std::string& prompt_text,
                              const std::vector<TaskProfile>& profiles,
                              const std::string& default_task_id) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const std::string hay = lower(prompt_text);

  bool default_known = false;
  for (const auto& p : profiles)
    if (p.task_id == default_task_id) default_known = true;
  if (!default_known)
    throw ValidationError("extract_task_type: default task '" + default_task_id +
                          "' is not a known profile");

  std::string best_task;
  int best_count = 0;
  for (const auto& p : profiles) {
    int count = 0;
    for (const auto& kw : p.keywords) {
      if (kw.empty()) continue;
      const std::string needle = lower(kw);
      size_t pos = 0;
      while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
      }
    }
    if (count > best_count || (count == best_count && count > 0 && p.task_id < best_task)) {
      best_count = count;
      best_task = p.task_id;
    }
  }
  return best_count > 0 ? best_task : default_task_id;
}

double cross_correlation(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw ValidationError("cross_correlation: sequences must have equal length");
  const size_t n = a.size();
  if (n == 0) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

int dominant_expert(const RoutingTrace& trace, int prompt, int layer) {
  std::vector<int> count;
  for (const auto& choice : trace.experts[prompt][layer]) {
    const int e = choice[0];
    if (e >= static_cast<int>(count.size())) count.resize(e + 1, 0);
    ++count[e];
  }
  int best = 0;
  for (int e = 1; e < static_cast<int>(count.size()); ++e)
    if (count[e] > count[best]) best = e;
  return best;
}

std::vector<std::vector<int>> prompt_expert_sets(const RoutingTrace& trace, int prompt) {
  std::vector<std::vector<int>> sets(trace.num_layers);
  for (int l = 0; l < trace.num_layers; ++l) {
    std::map<int, int> count;
    for (const auto& choice : trace.experts[prompt][l]) ++count[choice[0]];
    std::vector<std::pair<int, int>> items(count.begin(), count.end());
    std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    for (int i = 0; i < static_cast<int>(items.size()) && i < trace.top_k; ++i)
      sets[l].push_back(items[i].first);
  }
  return sets;
}

double measure_layer_correlation(const RoutingTrace& trace) {
  if (trace.num_layers < 2) return 0.0;
  double sum = 0.0;
  int pairs = 0;
  for (int l = 0; l + 1 < trace.num_layers; ++l) {
    std::vector<int> a, b;
    for (int p = 0; p < trace.num_prompts(); ++p) {
      for (int t = 0; t < trace.tokens_per_prompt(p); ++t) {
        a.push_back(trace.experts[p][l][t][0]);
        b.push_back(trace.experts[p][l + 1][t][0]);
      }
    }
    sum += cross_correlation(a, b);
    ++pairs;
  }
  return pairs > 0 ? sum / pairs : 0.0;
}

double measure_prompt_correlation(const RoutingTrace& trace) {
  const int prompts = trace.num_prompts();
  if (prompts < 2) return 0.0;
  // dominant expert per (prompt, layer), correlated against the next prompt's
  // sequence in one pooled Pearson so degenerate per-pair variances cannot bias
  // the estimate
  std::vector<std::vector<int>> dom(prompts, std::vector<int>(trace.num_layers));
  for (int p = 0; p < prompts; ++p)
    for (int l = 0; l < trace.num_layers; ++l) dom[p][l] = dominant_expert(trace, p, l);
  std::vector<int> a, b;
  a.reserve(static_cast<size_t>(prompts - 1) * trace.num_layers);
  b.reserve(a.capacity());
  for (int p = 0; p + 1 < prompts; ++p) {
    for (int l = 0; l < trace.num_layers; ++l) {
      a.push_back(dom[p][l]);
      b.push_back(dom[p + 1][l]);
    }
  }
  return cross_correlation(a, b);
}

namespace {

double bisect_lambda(double target, const std::function<double(double)>& measure) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 30; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (measure(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / 2.0;
}

}  // namespace

double calibrate_layer_lambda(const ModelShape& shape, double target, std::uint64_t seed) {
  if (target < 0.0 || target >= 1.0)
    throw ValidationError("calibration.target_layer_corr: must be in [0, 1)");
  return bisect_lambda(target, [&](double lam) {
    const auto cal = make_calibration(shape, lam, 0.5, 0, seed);
    const auto probe = gen_routing_trace(shape, cal, 200, 50);
    return measure_layer_correlation(probe);
  });
}

double calibrate_prompt_lambda(const ModelShape& shape, double layer_lambda, double target,
                               std::uint64_t seed) {
  if (target < 0.0 || target >= 1.0)
    throw ValidationError("calibration.target_prompt_corr: must be in [0, 1)");
  return bisect_lambda(target, [&](double lam) {
    const auto cal = make_calibration(shape, layer_lambda, lam, 0, seed);
    const auto probe = gen_routing_trace(shape, cal, 400, 16);
    return measure_prompt_correlation(probe);
  });
}

TraceCalibration make_calibration(const ModelShape& shape, double layer_lambda,
                                  double prompt_lambda, int initial_expert,
                                  std::uint64_t seed) {
  if (layer_lambda < 0.0 || layer_lambda > 1.0)
    throw ValidationError("calibration.layer_lambda: must be in [0, 1]");
  if (prompt_lambda < 0.0 || prompt_lambda > 1.0)
    throw ValidationError("calibration.prompt_lambda: must be in [0, 1]");
  TraceCalibration cal;
  cal.layer_transition.assign(shape.num_moe_layers - 1,
                              mixed_matrix(shape.experts_per_layer, layer_lambda));
  cal.prompt_transition.assign(shape.num_moe_layers,
                               mixed_matrix(shape.experts_per_layer, prompt_lambda));
  cal.initial_expert = initial_expert;
  cal.rng_seed = seed;
  return cal;
}

}  // namespace moesim
