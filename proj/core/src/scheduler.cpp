#include "moesim/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace moesim {

int SchedulerState::scheduled_tokens() const {
  long total = 0;
  for (const Request& r : scheduled) total += r.input_tokens;
  return static_cast<int>(total);
}

int rank_ahead(const Request& r, const std::vector<Request>& scheduled) {
  int n = 0;
  for (const Request& other : scheduled)
    if (other.request_id != r.request_id &&
        other.remaining_gen_estimate >= r.remaining_gen_estimate)
      ++n;
  return n;
}

LatencyEstimate latency_with_incoming(const Request& r, const std::vector<Request>& scheduled,
                                      int incoming_tokens, double delta_e,
                                      double per_token_cost) {
  LatencyEstimate est;
  est.rank_ahead = rank_ahead(r, scheduled);
  est.expert_loading = delta_e;
  est.compute = (static_cast<double>(incoming_tokens) +
                 static_cast<double>(est.rank_ahead) * r.remaining_gen_estimate) *
                per_token_cost;
  est.runtime_so_far = r.runtime_so_far;
  est.total = est.expert_loading + est.compute + est.runtime_so_far;
  return est;
}

LatencyEstimate expected_latency(const Request& r, const SchedulerState& state, double delta_e,
                                 double per_token_cost) {
  return latency_with_incoming(r, state.scheduled, r.input_tokens, delta_e, per_token_cost);
}

ScheduleResult schedule(const SchedulerState& state, double delta_e, double per_token_cost) {
  ScheduleResult out;
  out.state.token_budget = state.token_budget;
  out.state.scheduled = state.scheduled;

  std::vector<Request> queue = state.waiting;
  std::stable_sort(queue.begin(), queue.end(),
                   [](const Request& a, const Request& b) { return a.slo_ttft < b.slo_ttft; });

  long total_tokens = 0;
  for (const Request& s : out.state.scheduled) total_tokens += s.input_tokens;
  long pending_tokens = 0;  // admitted during this pass, still pre-prefill

  for (Request& r : queue) {
    ScheduleDecision decision;
    decision.request_id = r.request_id;

    if (!(r.input_tokens + total_tokens < state.token_budget)) {
      decision.reason = "token_budget";
      out.state.waiting.push_back(r);
      out.decisions.push_back(decision);
      continue;
    }

    const int incoming = static_cast<int>(pending_tokens) + r.input_tokens;
    LatencyEstimate own =
        latency_with_incoming(r, out.state.scheduled, incoming, delta_e, per_token_cost);
    decision.expected_total = own.total;
    if (!(own.total < r.slo_ttft)) {
      decision.reason = "slo_self";
      out.state.waiting.push_back(r);
      out.decisions.push_back(decision);
      continue;
    }

    std::vector<Request> joined = out.state.scheduled;
    joined.push_back(r);
    bool peers_ok = true;
    for (const Request& s : out.state.scheduled) {
      LatencyEstimate est = latency_with_incoming(s, joined, incoming, delta_e, per_token_cost);
      if (!(est.total < s.slo_ttft)) {
        peers_ok = false;
        break;
      }
    }
    if (!peers_ok) {
      decision.reason = "slo_peer";
      out.state.waiting.push_back(r);
      out.decisions.push_back(decision);
      continue;
    }

    r.state = RequestState::scheduled;
    out.state.scheduled.push_back(r);
    total_tokens += r.input_tokens;
    pending_tokens += r.input_tokens;
    decision.admitted = true;
    decision.reason = "admitted";
    out.decisions.push_back(decision);
  }
  return out;
}

Request update_generation_estimate(Request r, bool completed) {
  r.remaining_gen_estimate -= 1;
  if (r.remaining_gen_estimate <= 0) {
    if (completed) {
      r.remaining_gen_estimate = 0;
    } else {
      r.remaining_gen_estimate =
          static_cast<int>(std::ceil(0.05 * static_cast<double>(r.initial_gen_estimate)));
      if (r.remaining_gen_estimate < 1) r.remaining_gen_estimate = 1;
    }
  }
  return r;
}

}  // namespace moesim
