#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moesim/types.hpp"

namespace moesim {

// Decomposed latency estimate: total = expert_loading + compute + runtime_so_far.
struct LatencyEstimate {
  double expert_loading = 0.0;  // delta_e
  double compute = 0.0;         // (W + n_i * G_i) * c
  double runtime_so_far = 0.0;  // r_i
  double total = 0.0;
  int rank_ahead = 0;           // n_i
};

struct SchedulerState {
  std::vector<Request> waiting;    // arrival order
  std::vector<Request> scheduled;  // admission order
  int token_budget = 0;            // T_max

  int scheduled_tokens() const;    // sum of input_tokens over scheduled
};

// n_i: scheduled requests expected to finish generating after `r` (ties count),
// excluding r itself.
int rank_ahead(const Request& r, const std::vector<Request>& scheduled);

// Estimate with an explicit incoming-token count (the W in the compute term).
LatencyEstimate latency_with_incoming(const Request& r, const std::vector<Request>& scheduled,
                                      int incoming_tokens, double delta_e,
                                      double per_token_cost);

// Estimate for a single request using its own input tokens as the incoming W.
LatencyEstimate expected_latency(const Request& r, const SchedulerState& state,
                                 double delta_e, double per_token_cost);

struct ScheduleDecision {
  std::uint64_t request_id = 0;
  bool admitted = false;
  std::string reason;      // admitted | token_budget | slo_self | slo_peer
  double expected_total = 0.0;
};

struct ScheduleResult {
  SchedulerState state;
  std::vector<ScheduleDecision> decisions;  // one per waiting request, stringency order
};

// Admission pass: waiting requests are visited by ascending slo_ttft (FIFO on
// ties); a request is admitted when its input tokens keep the scheduled total
// strictly under token_budget and no request's estimate (its own or any
// scheduled peer's) meets or exceeds its SLO once the new tokens are counted.
// Input tokens admitted earlier in the same pass stay in the incoming W.
ScheduleResult schedule(const SchedulerState& state, double delta_e, double per_token_cost);

// One generated token: decrement G_i; when it hits zero on an incomplete
// request, reset to ceil(5% of the initial estimate).
Request update_generation_estimate(Request r, bool completed);

}  // namespace moesim
