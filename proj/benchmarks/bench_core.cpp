// Microbenchmarks for the hot paths: expected-token aggregation, budget
// selection, load planning, the admission pass, predictor fit/inference,
// trace generation, and a full simulation run.

#include <benchmark/benchmark.h>

#include <map>
#include <string>
#include <vector>

#include "moesim/distributions.hpp"
#include "moesim/engine.hpp"
#include "moesim/expert_store.hpp"
#include "moesim/predictor.hpp"
#include "moesim/scheduler.hpp"
#include "moesim/workload.hpp"

namespace {

using namespace moesim;

TaskProfile make_profile(const std::string& id, int num_layers) {
  TaskProfile p;
  p.task_id = id;
  p.name = id;
  p.input_tokens = {LengthDist::Family::uniform, 16.0, 128.0};
  p.output_tokens = {LengthDist::Family::constant, 32.0, 0.0};
  p.slo_ttft = 2.0;
  p.sensitivity.assign(num_layers, 1);
  return p;
}

std::vector<Request> make_requests(int n, Rng& rng) {
  std::vector<Request> out;
  for (int i = 0; i < n; ++i) {
    Request r;
    r.request_id = static_cast<std::uint64_t>(i);
    r.task_id = "t" + std::to_string(i % 3);
    r.input_tokens = rng.uniform_int(16, 256);
    r.slo_ttft = 0.2 + rng.uniform() * 2.0;
    r.remaining_gen_estimate = rng.uniform_int(8, 64);
    r.initial_gen_estimate = r.remaining_gen_estimate;
    out.push_back(r);
  }
  return out;
}

void BM_ExpectedTokens(benchmark::State& state) {
  const int m = 16;
  const int experts = 64;
  ModelShape shape{m, experts, 2, 1 << 20, 1 << 20};
  std::vector<TaskProfile> profiles;
  std::map<std::string, std::vector<std::vector<double>>> freqs;
  Rng rng(1);
  for (int t = 0; t < 3; ++t) {
    profiles.push_back(make_profile("t" + std::to_string(t), m));
    std::vector<std::vector<double>> rows(m, std::vector<double>(experts));
    for (auto& row : rows) {
      double sum = 0.0;
      for (double& v : row) sum += (v = rng.uniform() + 0.01);
      for (double& v : row) v /= sum;
    }
    freqs[profiles.back().task_id] = rows;
  }
  std::vector<Request> running = make_requests(24, rng);
  std::vector<Request> incoming = make_requests(8, rng);
  for (auto _ : state) {
    ExpectedTokens et = expected_tokens(shape, profiles, running, incoming, freqs, true);
    benchmark::DoNotOptimize(et.aggregate);
  }
}
BENCHMARK(BM_ExpectedTokens);

void BM_SelectExperts(benchmark::State& state) {
  const int m = 16;
  const int experts = 64;
  ModelShape shape{m, experts, 2, 1 << 20, 1 << 20};
  Rng rng(2);
  std::vector<std::vector<double>> aggregate(m, std::vector<double>(experts));
  for (auto& row : aggregate)
    for (double& v : row) v = rng.uniform() * 1000.0;
  std::vector<int> budgets(m, experts / 4);
  for (auto _ : state) {
    auto targets = select_experts(aggregate, shape, budgets);
    benchmark::DoNotOptimize(targets);
  }
}
BENCHMARK(BM_SelectExperts);

void BM_PlanLoading(benchmark::State& state) {
  const int m = 16;
  const int experts = 64;
  ModelShape shape{m, experts, 2, 1 << 20, 1 << 20};
  CostModel cost{0.001, 0.002, 1e9, 0.001, 1.2};
  Rng rng(3);
  std::vector<std::vector<double>> aggregate(m, std::vector<double>(experts));
  for (auto& row : aggregate)
    for (double& v : row) v = rng.uniform() * 1000.0;
  std::vector<int> budgets(m, experts / 4);
  Placement placement = Placement::full(shape);
  apply_plan(placement, plan_loading(placement, select_experts(aggregate, shape, budgets),
                                     aggregate, cost));
  // perturb the scores so roughly half of each layer's targets change
  for (auto& row : aggregate)
    for (double& v : row) v += rng.uniform() * 500.0;
  auto targets = select_experts(aggregate, shape, budgets);
  for (auto _ : state) {
    LoadingPlan plan = plan_loading(placement, targets, aggregate, cost);
    benchmark::DoNotOptimize(plan.delta_e);
  }
}
BENCHMARK(BM_PlanLoading);

void BM_SchedulePass(benchmark::State& state) {
  Rng rng(4);
  SchedulerState st;
  st.token_budget = 4096;
  st.scheduled = make_requests(32, rng);
  st.waiting = make_requests(64, rng);
  for (auto _ : state) {
    ScheduleResult res = schedule(st, 0.05, 0.0005);
    benchmark::DoNotOptimize(res.decisions);
  }
}
BENCHMARK(BM_SchedulePass);

RoutingTrace bench_trace(int prompts, int num_layers, int experts) {
  ModelShape shape{num_layers, experts, 2, 1 << 20, 1 << 20};
  TraceCalibration cal = make_calibration(shape, 0.7, 0.8, 0, 5);
  return gen_routing_trace(shape, cal, prompts, 16);
}

void BM_PredictorFit(benchmark::State& state) {
  RoutingTrace trace = bench_trace(1000, 8, 32);
  for (auto _ : state) {
    TransitionModel model = fit(trace, {}, 0.01, 32);
    benchmark::DoNotOptimize(model.layer_counts);
  }
}
BENCHMARK(BM_PredictorFit);

void BM_PredictChained(benchmark::State& state) {
  RoutingTrace trace = bench_trace(1000, 8, 32);
  TransitionModel model = fit(trace, {}, 0.01, 32);
  for (auto _ : state) {
    Prediction p = predict_chained(model, {7, 13});
    benchmark::DoNotOptimize(p.layers);
  }
}
BENCHMARK(BM_PredictChained);

void BM_RoutingTraceGen(benchmark::State& state) {
  for (auto _ : state) {
    RoutingTrace trace = bench_trace(100, 8, 32);
    benchmark::DoNotOptimize(trace.experts);
  }
}
BENCHMARK(BM_RoutingTraceGen);

void BM_EngineRun(benchmark::State& state) {
  const int m = 8;
  RunInputs in;
  in.shape = ModelShape{m, 16, 2, 1 << 20, 8 << 20};
  in.profiles = {make_profile("t0", m), make_profile("t1", m), make_profile("t2", m)};
  in.cost = CostModel{0.0005, 0.001, 1e9, 0.0005, 1.2};
  in.config.mode = Mode::emoe_a;
  in.config.invocation_period = 10;
  in.config.budget_fraction = 0.5;
  in.config.token_budget = 2048;
  in.config.seed = 6;
  in.requests = gen_request_trace(
      50.0, 4.0, in.profiles, {{"t0", 1.0}, {"t1", 1.0}, {"t2", 1.0}}, 7);
  in.training_prompts = 100;
  for (int i = 0; i < 100; ++i) in.training_task_ids.push_back("t" + std::to_string(i % 3));
  TraceCalibration cal = make_calibration(in.shape, 0.7, 0.8, 0, 8);
  in.trace = gen_routing_trace(in.shape, cal,
                               in.training_prompts + static_cast<int>(in.requests.size()), 40);
  for (auto _ : state) {
    RunResult res = run(in);
    benchmark::DoNotOptimize(res.metrics.hit_rate);
  }
}
BENCHMARK(BM_EngineRun);

}  // namespace

BENCHMARK_MAIN();
