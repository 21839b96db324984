#pragma once

#include <string>
#include <vector>

#include "moesim/engine.hpp"
#include "moesim/scenario.hpp"

namespace moesim {

// shortest round-trip decimal form, locale-independent (std::to_chars)
std::string fmt_double(double v);

// One summary row per sweep point.  Columns are part of the CLI contract.
struct SummaryRow {
  SweepPoint point;
  int requests = 0;
  int served = 0;
  int unserved = 0;
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;
  double ttft_p50 = 0.0;
  double ttft_p90 = 0.0;
  double hit_rate = 0.0;
  double throughput = 0.0;
  int slo_violations = 0;
  double predictor_overhead = 0.0;
  double transfer_seconds = 0.0;
  std::uint64_t peak_memory_bytes = 0;
  std::uint64_t steady_expert_bytes = 0;
};

SummaryRow make_summary_row(const SweepPoint& point, const Metrics& metrics);

extern const char* const kSummaryHeader;

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::string& path);
void write_summary_json(const std::string& path, const std::vector<SummaryRow>& rows);

void write_metrics_json(const std::string& path, const SweepPoint& point, const Metrics& m);
void write_requests_csv(const std::string& path, const Metrics& m);
void write_events_csv(const std::string& path, const std::vector<EventRecord>& events);
void write_memory_csv(const std::string& path, const std::vector<MemorySample>& samples);
void write_snapshots_jsonl(const std::string& path, const std::vector<PlacementSnapshot>& snaps);

// routing-trace round trip: newline-delimited JSON, one prompt per line
void save_trace(const RoutingTrace& trace, const std::string& path);
RoutingTrace load_trace(const std::string& path);

// Mode-vs-baseline ratios at matching (invocation_period, arrival_rate);
// memory_ratio compares steady expert bytes.  Missing baseline rows are a
// validation error.
struct ComparisonRow {
  SweepPoint point;
  double latency_ratio = 0.0;    // p50 / baseline p50
  double memory_ratio = 0.0;     // steady expert bytes / baseline
  double throughput_ratio = 0.0;
  double hit_rate = 0.0;
  double baseline_latency_p50 = 0.0;
};

std::vector<ComparisonRow> compare_rows(const std::vector<SummaryRow>& rows);
void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows);

}  // namespace moesim
