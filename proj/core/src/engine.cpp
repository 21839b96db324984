#include "moesim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "moesim/distributions.hpp"

namespace moesim {

Mode mode_from_string(const std::string& s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "dynamic") return Mode::dynamic;
  if (s == "random") return Mode::random;
  if (s == "emoe_a") return Mode::emoe_a;
  if (s == "emoe_l") return Mode::emoe_l;
  if (s == "emoe_e") return Mode::emoe_e;
  throw ValidationError("engine.mode: unknown mode " + s);
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::dynamic: return "dynamic";
    case Mode::random: return "random";
    case Mode::emoe_a: return "emoe_a";
    case Mode::emoe_l: return "emoe_l";
    case Mode::emoe_e: return "emoe_e";
  }
  return "baseline";
}

bool mode_uses_predictor(Mode m) {
  return m == Mode::emoe_a || m == Mode::emoe_l || m == Mode::emoe_e;
}

std::vector<int> EngineConfig::budgets(const ModelShape& shape) const {
  if (!budget_per_layer.empty()) return budget_per_layer;
  int l = static_cast<int>(std::llround(budget_fraction * shape.experts_per_layer));
  l = std::max(1, std::min(shape.experts_per_layer, l));
  return std::vector<int>(shape.num_moe_layers, l);
}

void EngineConfig::validate(const ModelShape& shape) const {
  if (invocation_period < 1) throw ValidationError("engine.invocation_period: must be >= 1");
  if (!(budget_fraction > 0.0) || budget_fraction > 1.0)
    throw ValidationError("engine.budget_fraction: must be in (0, 1]");
  if (token_budget < 1) throw ValidationError("engine.token_budget: must be >= 1");
  if (!budget_per_layer.empty()) {
    if (static_cast<int>(budget_per_layer.size()) != shape.num_moe_layers)
      throw ValidationError("engine.budget_per_layer: must have one entry per layer");
    for (int b : budget_per_layer)
      if (b < 1 || b > shape.experts_per_layer)
        throw ValidationError("engine.budget_per_layer: entries must be in [1, experts_per_layer]");
  }
}

void RunInputs::validate() const {
  shape.validate();
  cost.validate();
  config.validate(shape);
  if (profiles.empty()) throw ValidationError("scenario.tasks: must not be empty");
  std::set<std::string> task_ids;
  for (const TaskProfile& p : profiles) {
    p.validate(shape);
    if (!task_ids.insert(p.task_id).second)
      throw ValidationError("scenario.tasks: duplicate task_id " + p.task_id);
  }
  double prev_arrival = 0.0;
  for (size_t i = 0; i < requests.size(); ++i) {
    const Request& r = requests[i];
    if (r.request_id != i)
      throw ValidationError("scenario.requests: request_id must equal arrival index");
    if (r.arrival_time < prev_arrival)
      throw ValidationError("scenario.requests: arrival times must be non-decreasing");
    prev_arrival = r.arrival_time;
    if (task_ids.count(r.task_id) == 0)
      throw ValidationError("scenario.requests: unknown task_id " + r.task_id);
    if (r.input_tokens < 1) throw ValidationError("scenario.requests: input_tokens must be >= 1");
    if (r.target_output_tokens < 1)
      throw ValidationError("scenario.requests: target_output_tokens must be >= 1");
    if (r.remaining_gen_estimate < 1 || r.initial_gen_estimate < 1)
      throw ValidationError("scenario.requests: generation estimates must be >= 1");
  }
  trace.validate(shape);
  if (training_prompts < 0) throw ValidationError("scenario.training_prompts: must be >= 0");
  if (trace.num_prompts() < training_prompts + static_cast<int>(requests.size()))
    throw ValidationError("scenario.trace: needs one prompt per training slot and request");
  if (mode_uses_predictor(config.mode) && training_prompts < 1)
    throw ValidationError("scenario.training_prompts: predictor modes need at least 1");
  if (!training_task_ids.empty()) {
    if (static_cast<int>(training_task_ids.size()) != training_prompts)
      throw ValidationError("scenario.training_task_ids: size must equal training_prompts");
    for (const std::string& t : training_task_ids)
      if (task_ids.count(t) == 0)
        throw ValidationError("scenario.training_task_ids: unknown task_id " + t);
  }
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  q = std::max(0.0, std::min(1.0, q));
  int rank = static_cast<int>(std::ceil(q * values.size()));
  rank = std::max(1, std::min(static_cast<int>(values.size()), rank));
  return values[rank - 1];
}

Metrics collect_metrics(const std::vector<EventRecord>& events,
                        const std::vector<MemorySample>& memory) {
  Metrics m;
  std::map<std::uint64_t, RequestOutcome> outcomes;
  for (const EventRecord& ev : events) {
    m.makespan = std::max(m.makespan, ev.time);
    if (ev.event == "arrival") {
      RequestOutcome& o = outcomes[ev.request_id];
      o.request_id = ev.request_id;
      o.task_id = ev.detail;
      o.arrival = ev.time;
      o.slo_ttft = ev.a;
      o.input_tokens = static_cast<int>(ev.b);
    } else if (ev.event == "admit") {
      RequestOutcome& o = outcomes[ev.request_id];
      if (o.admit_time < 0.0) o.admit_time = ev.time;
    } else if (ev.event == "first_token") {
      outcomes[ev.request_id].first_token_time = ev.time;
    } else if (ev.event == "complete") {
      RequestOutcome& o = outcomes[ev.request_id];
      o.completion_time = ev.time;
      o.generated_tokens = static_cast<int>(ev.a);
      o.served = true;
    } else if (ev.event == "unserved") {
      outcomes[ev.request_id].generated_tokens = static_cast<int>(ev.a);
    } else if (ev.event == "routing") {
      m.routing_hits += static_cast<std::uint64_t>(ev.a);
      m.routing_decisions += static_cast<std::uint64_t>(ev.b);
    } else if (ev.event == "predictor_done") {
      m.predictor_busy_seconds += ev.a;
    } else if (ev.event == "plan") {
      m.transfer_seconds += ev.a;
    }
  }

  std::vector<double> latencies, ttfts;
  for (auto& [id, o] : outcomes) {
    ++m.requests;
    if (o.served) {
      ++m.served;
      latencies.push_back(o.latency());
      o.slo_violated = o.ttft() > o.slo_ttft;
      if (o.slo_violated) ++m.slo_violations;
    } else {
      ++m.unserved;
    }
    if (o.first_token_time >= 0.0) ttfts.push_back(o.ttft());
    m.generated_tokens += static_cast<std::uint64_t>(o.generated_tokens);
  }
  m.total_tokens = m.generated_tokens;  // prefill charges time, not throughput tokens
  if (!latencies.empty()) {
    double sum = 0.0;
    for (double v : latencies) sum += v;
    m.latency_mean = sum / static_cast<double>(latencies.size());
    m.latency_p50 = percentile(latencies, 0.5);
    m.latency_p90 = percentile(latencies, 0.9);
  }
  m.ttft_p50 = percentile(ttfts, 0.5);
  m.ttft_p90 = percentile(ttfts, 0.9);
  if (m.makespan > 0.0) m.throughput = static_cast<double>(m.total_tokens) / m.makespan;
  if (m.routing_decisions > 0)
    m.hit_rate = static_cast<double>(m.routing_hits) / static_cast<double>(m.routing_decisions);
  for (const MemorySample& s : memory) m.peak_memory_bytes = std::max(m.peak_memory_bytes, s.total_bytes);
  if (!memory.empty()) m.steady_expert_bytes = memory.back().expert_bytes;
  for (auto& [id, o] : outcomes) m.outcomes.push_back(o);
  return m;
}

namespace {

enum class EvKind { load_start, load_complete, predictor_done, iter_start, iter_end, arrival, predictor_fire };

// spec'd tie order: placement mutations < iteration < arrival < predictor fire
int klass_of(EvKind k) {
  switch (k) {
    case EvKind::load_start:
    case EvKind::load_complete:
    case EvKind::predictor_done: return 0;
    case EvKind::iter_start:
    case EvKind::iter_end: return 1;
    case EvKind::arrival: return 2;
    case EvKind::predictor_fire: return 3;
  }
  return 3;
}

struct Ev {
  double time = 0.0;
  int klass = 0;
  std::uint64_t seq = 0;
  EvKind kind = EvKind::arrival;
  std::int64_t payload = -1;  // arrival/fire: arrival index; loads: layer
  int generation = 0;         // plan generation for load events
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.klass != b.klass) return a.klass > b.klass;
    return a.seq > b.seq;
  }
};

class Engine {
 public:
  explicit Engine(const RunInputs& in) : in_(in), rng_(in.config.seed) {}

  RunResult run() {
    in_.validate();
    setup();
    while (!queue_.empty()) {
      Ev ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      dispatch(ev);
    }
    finish();
    RunResult result;
    result.metrics = collect_metrics(events_, memory_);
    result.events = std::move(events_);
    result.snapshots = std::move(snapshots_);
    result.memory = std::move(memory_);
    result.invocations = std::move(invocations_);
    return result;
  }

 private:
  // --- setup -------------------------------------------------------------
  void setup() {
    const ModelShape& shape = in_.shape;
    budgets_ = in_.config.budgets(shape);
    if (in_.config.mode == Mode::dynamic) {
      placement_ = Placement::empty(shape, budgets_);
    } else {
      // baseline keeps everything; predictor modes start from a full device
      // and let the first plan trim down to budget without any transfer
      placement_ = Placement::full(shape);
    }
    if (mode_uses_predictor(in_.config.mode)) {
      RoutingTrace train;
      train.num_layers = in_.trace.num_layers;
      train.top_k = in_.trace.top_k;
      train.experts.assign(in_.trace.experts.begin(),
                           in_.trace.experts.begin() + in_.training_prompts);
      model_ = fit(train, in_.training_task_ids, 0.01, shape.experts_per_layer);
      for (const TaskProfile& p : in_.profiles)
        fitted_freq_[p.task_id] = predicted_frequencies(model_, p.task_id);
    }
    sample_memory();
    snapshot_placement(-1);
    for (size_t i = 0; i < in_.requests.size(); ++i)
      push(in_.requests[i].arrival_time, EvKind::arrival, static_cast<std::int64_t>(i));
  }

  // --- event plumbing ----------------------------------------------------
  void push(double t, EvKind kind, std::int64_t payload = -1, int generation = 0) {
    queue_.push(Ev{t, klass_of(kind), seq_++, kind, payload, generation});
  }

  void dispatch(const Ev& ev) {
    switch (ev.kind) {
      case EvKind::arrival: on_arrival(static_cast<size_t>(ev.payload)); break;
      case EvKind::predictor_fire: on_predictor_fire(ev.payload); break;
      case EvKind::predictor_done: on_predictor_done(); break;
      case EvKind::load_start: on_load_start(ev); break;
      case EvKind::load_complete: on_load_complete(ev); break;
      case EvKind::iter_start:
        if (pending_deferred_start_) {
          pending_deferred_start_ = false;
          iteration_in_flight_ = false;
        }
        start_iteration();
        break;
      case EvKind::iter_end: on_iteration_end(); break;
    }
  }

  void record(const std::string& event, std::int64_t request_id = -1, int layer = -1,
              double a = 0.0, double b = 0.0, const std::string& detail = {}) {
    events_.push_back(EventRecord{now_, event, request_id, layer, a, b, detail});
  }

  void sample_memory() {
    memory_.push_back(MemorySample{now_, placement_.device_bytes_used(),
                                   placement_.expert_bytes_used()});
  }

  void snapshot_placement(int invocation) {
    for (int l = 0; l < in_.shape.num_moe_layers; ++l) {
      PlacementSnapshot snap;
      snap.time = now_;
      snap.invocation = invocation;
      snap.layer = l;
      snap.residents = placement_.residents(l);
      snap.layer_bytes = static_cast<std::uint64_t>(snap.residents.size()) * in_.shape.expert_bytes;
      snapshots_.push_back(std::move(snap));
    }
  }

  // --- arrivals and scheduling --------------------------------------------
  void on_arrival(size_t index) {
    Request r = in_.requests[index];
    r.state = RequestState::waiting;
    record("arrival", r.request_id, -1, r.slo_ttft, r.input_tokens, r.task_id);
    waiting_.push_back(r);
    if (in_.config.mode == Mode::emoe_e) {
      // per-prompt prediction is on the critical path: mark the predictor busy
      // before admission so the prompt's first iteration waits for it
      on_predictor_fire(static_cast<std::int64_t>(index));
    } else if ((mode_uses_predictor(in_.config.mode) || in_.config.mode == Mode::random) &&
               static_cast<std::int64_t>(index) % in_.config.invocation_period == 0) {
      push(now_, EvKind::predictor_fire, static_cast<std::int64_t>(index));
    }
    run_scheduler();
  }

  void run_scheduler() {
    if (waiting_.empty()) return;
    SchedulerState state;
    state.waiting = waiting_;
    state.scheduled = scheduled_;
    state.token_budget = in_.config.token_budget;
    double delta_e = std::max(0.0, transfer_busy_until_ - now_);
    ScheduleResult result = schedule(state, delta_e, in_.cost.per_token_cost);

    std::set<std::uint64_t> admitted;
    for (const ScheduleDecision& d : result.decisions) {
      if (d.admitted) {
        admitted.insert(d.request_id);
        record("admit", static_cast<std::int64_t>(d.request_id), -1, d.expected_total);
      } else {
        record("defer", static_cast<std::int64_t>(d.request_id), -1, 0.0, 0.0, d.reason);
      }
    }
    if (admitted.empty()) return;
    scheduled_ = std::move(result.state.scheduled);
    // keep the engine's waiting queue in arrival order for FIFO tie-breaks
    waiting_.erase(std::remove_if(waiting_.begin(), waiting_.end(),
                                  [&](const Request& r) { return admitted.count(r.request_id); }),
                   waiting_.end());
    start_iteration();
  }

  // --- predictor and loading ----------------------------------------------
  void on_predictor_fire(std::int64_t prompt_index) {
    if (predictor_busy_until_ > now_) {  // single predictor; serialize invocations
      push(predictor_busy_until_, EvKind::predictor_fire, prompt_index);
      return;
    }
    record("predictor_fire", -1, -1, static_cast<double>(prompt_index));
    predictor_busy_until_ = now_ + in_.cost.predictor_invocation_cost;
    fire_prompt_ = prompt_index;
    fire_time_ = now_;
    push(predictor_busy_until_, EvKind::predictor_done);
  }

  std::vector<std::vector<double>> invocation_aggregate(std::int64_t prompt_index) {
    const ModelShape& shape = in_.shape;
    if (in_.config.mode == Mode::random) {
      // uniformly sampled target sets stand in for predictions
      std::vector<std::vector<double>> agg(shape.num_moe_layers,
                                           std::vector<double>(shape.experts_per_layer, 0.0));
      for (int l = 0; l < shape.num_moe_layers; ++l) {
        std::vector<int> pool(shape.experts_per_layer);
        for (int e = 0; e < shape.experts_per_layer; ++e) pool[e] = e;
        for (int pick = 0; pick < budgets_[l]; ++pick) {
          int j = rng_.uniform_int(pick, shape.experts_per_layer - 1);
          std::swap(pool[pick], pool[j]);
          agg[l][pool[pick]] = 1.0;
        }
      }
      return agg;
    }

    const int prev = in_.training_prompts + static_cast<int>(prompt_index) - 1;
    Prediction pred;
    if (in_.config.mode == Mode::emoe_l) {
      pred = predict_chained(model_, prompt_expert_sets(in_.trace, prev)[0]);
    } else {
      pred = predict_all_layers(model_, prompt_expert_sets(in_.trace, prev));
    }

    // per-task frequencies: prediction scores modulated by fitted task usage
    std::map<std::string, std::vector<std::vector<double>>> freqs;
    for (const TaskProfile& p : in_.profiles) {
      const auto& fitted = fitted_freq_.at(p.task_id);
      std::vector<std::vector<double>> rows(shape.num_moe_layers,
                                            std::vector<double>(shape.experts_per_layer, 0.0));
      for (int l = 0; l < shape.num_moe_layers; ++l) {
        double sum = 0.0;
        for (int e = 0; e < shape.experts_per_layer; ++e) {
          rows[l][e] = pred.layers[l].scores[e] * fitted[l][e];
          sum += rows[l][e];
        }
        if (sum <= 0.0) {
          for (int e = 0; e < shape.experts_per_layer; ++e)
            rows[l][e] = 1.0 / shape.experts_per_layer;
        } else {
          for (int e = 0; e < shape.experts_per_layer; ++e) rows[l][e] /= sum;
        }
      }
      freqs[p.task_id] = std::move(rows);
    }
    ExpectedTokens expected =
        expected_tokens(shape, in_.profiles, scheduled_, waiting_, freqs, in_.config.task_aware);
    return expected.aggregate;
  }

  void on_predictor_done() {
    record("predictor_done", -1, -1, in_.cost.predictor_invocation_cost);
    ++plan_generation_;  // supersede any not-yet-applied layer ops

    std::vector<std::vector<double>> aggregate = invocation_aggregate(fire_prompt_);
    last_aggregate_ = aggregate;
    std::vector<std::vector<int>> targets = loading_targets(aggregate, placement_, budgets_);
    LoadingPlan plan = plan_loading(placement_, targets, aggregate, in_.cost);
    record("plan", -1, -1, plan.delta_e, plan.total_loads);
    invocations_.push_back(InvocationRecord{invocation_count_, fire_prompt_, fire_time_,
                                            plan.delta_e, plan.total_loads});

    int ops_count = 0;
    double cursor = now_;
    for (const auto& ops : plan.layers) {
      if (ops.evictions.empty() && ops.loads.empty()) continue;
      push(cursor, EvKind::load_start, ops.layer, plan_generation_);
      push(cursor + ops.duration, EvKind::load_complete, ops.layer, plan_generation_);
      cursor += ops.duration;
      ++ops_count;
    }
    transfer_busy_until_ = cursor;
    plan_by_generation_[plan_generation_] = std::move(plan);
    remaining_ops_[plan_generation_] = ops_count;
    invocation_by_generation_[plan_generation_] = invocation_count_;
    if (ops_count == 0) snapshot_placement(invocation_count_);
    ++invocation_count_;
  }

  void on_load_start(const Ev& ev) {
    if (ev.generation != plan_generation_) return;  // superseded plan
    const auto& ops = plan_by_generation_[ev.generation].layers[ev.payload];
    for (int e : ops.evictions) placement_.evict(ops.layer, e);
    record("load_start", -1, ops.layer, 0.0, static_cast<double>(ops.loads.size()));
    if (!ops.evictions.empty()) sample_memory();
  }

  void on_load_complete(const Ev& ev) {
    if (ev.generation != plan_generation_) return;
    const auto& ops = plan_by_generation_[ev.generation].layers[ev.payload];
    for (int e : ops.loads) placement_.load(ops.layer, e);
    record("load_complete", -1, ops.layer, ops.duration);
    if (!ops.loads.empty()) sample_memory();
    if (--remaining_ops_[ev.generation] == 0)
      snapshot_placement(invocation_by_generation_[ev.generation]);
  }

  // --- iterations ----------------------------------------------------------
  // on-demand transfers for dynamic mode: keep exactly the experts this batch
  // needs, synchronously on the critical path
  double dynamic_transfers() {
    double seconds = 0.0;
    const double per_expert = in_.cost.expert_transfer_seconds(in_.shape.expert_bytes);
    for (int l = 0; l < in_.shape.num_moe_layers; ++l) {
      std::map<int, int> demand;  // expert -> token count at this layer
      for (const Request& r : scheduled_) {
        int prompt = in_.training_prompts + static_cast<int>(r.request_id);
        int tok = std::min(generated_[r.request_id], in_.trace.tokens_per_prompt(prompt) - 1);
        ++demand[in_.trace.experts[prompt][l][tok][0]];
      }
      std::vector<std::pair<int, int>> ranked(demand.begin(), demand.end());
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second > b.second;  // by demand; map order gives index ties
      });
      if (static_cast<int>(ranked.size()) > budgets_[l]) ranked.resize(budgets_[l]);
      std::set<int> needed;
      for (const auto& [e, n] : ranked) needed.insert(e);

      std::vector<int> evicts, loads;
      for (int e : placement_.residents(l))
        if (needed.count(e) == 0) evicts.push_back(e);
      for (int e : needed)
        if (!placement_.resident(l, e)) loads.push_back(e);
      if (evicts.empty() && loads.empty()) continue;
      for (int e : evicts) placement_.evict(l, e);
      for (int e : loads) placement_.load(l, e);
      double layer_seconds = static_cast<double>(loads.size()) * per_expert;
      seconds += layer_seconds;
      record("load_start", -1, l, 0.0, static_cast<double>(loads.size()));
      record("load_complete", -1, l, layer_seconds);
      sample_memory();
    }
    return seconds;
  }

  void start_iteration() {
    if (iteration_in_flight_ || scheduled_.empty()) return;
    if (in_.config.mode == Mode::emoe_e) {
      // per-prompt prediction sits on the critical path: wait out the
      // predictor and its loads before computing
      double unblock = std::max(predictor_busy_until_, transfer_busy_until_);
      if (unblock > now_) {
        iteration_in_flight_ = true;
        pending_deferred_start_ = true;
        push(unblock, EvKind::iter_start);
        return;
      }
    }

    double extra = in_.config.mode == Mode::dynamic ? dynamic_transfers() : 0.0;

    iter_hits_ = 0;
    iter_decisions_ = 0;
    long tokens = 0;
    batch_.clear();
    for (const Request& r : scheduled_) {
      batch_.push_back(r.request_id);
      int prompt = in_.training_prompts + static_cast<int>(r.request_id);
      int tok = std::min(generated_[r.request_id], in_.trace.tokens_per_prompt(prompt) - 1);
      for (int l = 0; l < in_.shape.num_moe_layers; ++l) {
        static const std::vector<double> kNoScores;
        const std::vector<double>& scores =
            last_aggregate_.empty() ? kNoScores : last_aggregate_[l];
        RouteResult res;
        if (placement_.resident_count(l) == 0) {
          // full-turnover window: every replacement for this layer is still in
          // flight, so the token is a forced miss on its gate choice
          res = {in_.trace.experts[prompt][l][tok][0], -1, false};
        } else {
          res = route_token(in_.trace.experts[prompt][l][tok], placement_, l, scores);
        }
        if (res.hit) ++iter_hits_;
        ++iter_decisions_;
      }
      tokens += 1 + (generated_[r.request_id] == 0 ? r.input_tokens : 0);
    }
    double factor = transfer_busy_until_ > now_ ? in_.cost.contention_factor : 1.0;
    iter_elapsed_ = static_cast<double>(tokens) * in_.cost.per_token_cost * factor + extra;
    iter_tokens_ = tokens;
    iteration_in_flight_ = true;
    pending_deferred_start_ = false;
    push(now_ + iter_elapsed_, EvKind::iter_end);
  }

  void on_iteration_end() {
    iteration_in_flight_ = false;
    record("iteration", -1, -1, iter_elapsed_, static_cast<double>(iter_tokens_));
    record("routing", -1, -1, static_cast<double>(iter_hits_), static_cast<double>(iter_decisions_));

    bool completed_any = false;
    std::set<std::uint64_t> done;
    for (std::uint64_t id : batch_) {
      auto it = std::find_if(scheduled_.begin(), scheduled_.end(),
                             [&](const Request& r) { return r.request_id == id; });
      if (it == scheduled_.end()) continue;
      Request& r = *it;
      r.runtime_so_far += iter_elapsed_;
      if (generated_[id] == 0) record("first_token", static_cast<std::int64_t>(id));
      ++generated_[id];
      bool completed = generated_[id] >= r.target_output_tokens;
      r = update_generation_estimate(r, completed);
      if (completed) {
        record("complete", static_cast<std::int64_t>(id), -1,
               static_cast<double>(generated_[id]));
        done.insert(id);
        completed_any = true;
      }
    }
    if (!done.empty())
      scheduled_.erase(std::remove_if(scheduled_.begin(), scheduled_.end(),
                                      [&](const Request& r) { return done.count(r.request_id); }),
                       scheduled_.end());
    if (completed_any) run_scheduler();
    start_iteration();
  }

  // --- teardown -------------------------------------------------------------
  void finish() {
    for (const Request& r : waiting_)
      record("unserved", static_cast<std::int64_t>(r.request_id), -1,
             static_cast<double>(generated_[r.request_id]));
    for (const Request& r : scheduled_)
      record("unserved", static_cast<std::int64_t>(r.request_id), -1,
             static_cast<double>(generated_[r.request_id]));
  }

  const RunInputs& in_;
  Rng rng_;
  Placement placement_;
  TransitionModel model_;
  std::map<std::string, std::vector<std::vector<double>>> fitted_freq_;
  std::vector<int> budgets_;

  std::priority_queue<Ev, std::vector<Ev>, EvLater> queue_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;

  std::vector<Request> waiting_;    // arrival order
  std::vector<Request> scheduled_;  // admission order
  std::map<std::uint64_t, int> generated_;

  double predictor_busy_until_ = 0.0;
  double transfer_busy_until_ = 0.0;
  std::int64_t fire_prompt_ = 0;
  double fire_time_ = 0.0;
  int plan_generation_ = 0;
  int invocation_count_ = 0;
  std::map<int, LoadingPlan> plan_by_generation_;
  std::map<int, int> remaining_ops_;
  std::map<int, int> invocation_by_generation_;
  std::vector<std::vector<double>> last_aggregate_;

  bool iteration_in_flight_ = false;
  bool pending_deferred_start_ = false;
  std::vector<std::uint64_t> batch_;
  double iter_elapsed_ = 0.0;
  long iter_tokens_ = 0;
  long iter_hits_ = 0;
  long iter_decisions_ = 0;

  std::vector<EventRecord> events_;
  std::vector<PlacementSnapshot> snapshots_;
  std::vector<MemorySample> memory_;
  std::vector<InvocationRecord> invocations_;
};

}  // namespace

RunResult run(const RunInputs& inputs) { return Engine(inputs).run(); }

}  // namespace moesim
