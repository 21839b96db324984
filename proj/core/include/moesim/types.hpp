#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace moesim {

// Raised when configuration or input data fails validation.  Messages name
// the offending field; the CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Static description of the served mixture-of-experts model.
struct ModelShape {
  int num_moe_layers = 0;          // m
  int experts_per_layer = 0;       // E, uniform across layers
  int top_k = 0;                   // gate choices per token per layer
  std::uint64_t expert_bytes = 0;  // device bytes held by one expert
  std::uint64_t base_bytes = 0;    // non-expert device bytes (attention, kv, ...)

  // device bytes when every expert of every layer is resident
  std::uint64_t full_expert_bytes() const {
    return static_cast<std::uint64_t>(num_moe_layers) *
           static_cast<std::uint64_t>(experts_per_layer) * expert_bytes;
  }

  void validate() const;
};

enum class RequestState { waiting, scheduled, running, completed };

const char* to_string(RequestState s);

// One inference request.  remaining_gen_estimate / runtime_so_far / state are
// bookkeeping fields mutated by the scheduler and engine.
struct Request {
  std::uint64_t request_id = 0;
  double arrival_time = 0.0;        // seconds
  std::string task_id;
  int input_tokens = 0;             // W
  double slo_ttft = 0.0;            // time-to-first-token target, seconds
  int remaining_gen_estimate = 0;   // G_i, tokens the request is still expected to emit
  int initial_gen_estimate = 0;     // G_i at scheduling time
  int target_output_tokens = 0;     // ground-truth generation length (simulation input)
  double runtime_so_far = 0.0;      // r_i, seconds spent running
  RequestState state = RequestState::waiting;
};

}  // namespace moesim
