#pragma once

#include <cstdint>

#include "moesim/types.hpp"

namespace moesim {

// Profiled serving costs, all in seconds / bytes-per-second.
struct CostModel {
  double per_token_cost = 0.0;             // c: seconds per processed token
  double per_expert_transfer = 0.0;        // fixed setup per expert copy
  double hd_bandwidth = 0.0;               // host->device bytes per second
  double predictor_invocation_cost = 0.0;  // seconds per predictor call
  double contention_factor = 1.0;          // compute slowdown while transfers overlap

  // seconds to move one expert host->device
  double expert_transfer_seconds(std::uint64_t expert_bytes) const {
    return per_expert_transfer + static_cast<double>(expert_bytes) / hd_bandwidth;
  }

  void validate() const;
};

}  // namespace moesim
