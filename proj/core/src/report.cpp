#include "moesim/report.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace moesim {

using nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError(context + ": not a number: " + s);
  return v;
}

template <typename T>
T parse_int(const std::string& s, const std::string& context) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError(context + ": not an integer: " + s);
  return v;
}

}  // namespace

const char* const kSummaryHeader =
    "mode,budget_fraction,invocation_period,arrival_rate,requests,served,unserved,"
    "latency_p50,latency_p90,ttft_p50,ttft_p90,hit_rate,throughput,slo_violations,"
    "predictor_overhead,transfer_seconds,peak_memory_bytes,steady_expert_bytes";

SummaryRow make_summary_row(const SweepPoint& point, const Metrics& m) {
  SummaryRow r;
  r.point = point;
  r.requests = m.requests;
  r.served = m.served;
  r.unserved = m.unserved;
  r.latency_p50 = m.latency_p50;
  r.latency_p90 = m.latency_p90;
  r.ttft_p50 = m.ttft_p50;
  r.ttft_p90 = m.ttft_p90;
  r.hit_rate = m.hit_rate;
  r.throughput = m.throughput;
  r.slo_violations = m.slo_violations;
  r.predictor_overhead = m.predictor_busy_seconds;
  r.transfer_seconds = m.transfer_seconds;
  r.peak_memory_bytes = m.peak_memory_bytes;
  r.steady_expert_bytes = m.steady_expert_bytes;
  return r;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows) {
    out << to_string(r.point.mode) << ',' << fmt_double(r.point.budget_fraction) << ','
        << r.point.invocation_period << ',' << fmt_double(r.point.arrival_rate) << ','
        << r.requests << ',' << r.served << ',' << r.unserved << ','
        << fmt_double(r.latency_p50) << ',' << fmt_double(r.latency_p90) << ','
        << fmt_double(r.ttft_p50) << ',' << fmt_double(r.ttft_p90) << ','
        << fmt_double(r.hit_rate) << ',' << fmt_double(r.throughput) << ','
        << r.slo_violations << ',' << fmt_double(r.predictor_overhead) << ','
        << fmt_double(r.transfer_seconds) << ',' << r.peak_memory_bytes << ','
        << r.steady_expert_bytes << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty summary file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSummaryHeader)
    throw ValidationError(path + ": unexpected summary header: " + line);
  std::vector<SummaryRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 18) throw ValidationError(ctx + ": expected 18 columns");
    SummaryRow r;
    r.point.mode = mode_from_string(f[0]);
    r.point.budget_fraction = parse_double(f[1], ctx);
    r.point.invocation_period = parse_int<int>(f[2], ctx);
    r.point.arrival_rate = parse_double(f[3], ctx);
    r.requests = parse_int<int>(f[4], ctx);
    r.served = parse_int<int>(f[5], ctx);
    r.unserved = parse_int<int>(f[6], ctx);
    r.latency_p50 = parse_double(f[7], ctx);
    r.latency_p90 = parse_double(f[8], ctx);
    r.ttft_p50 = parse_double(f[9], ctx);
    r.ttft_p90 = parse_double(f[10], ctx);
    r.hit_rate = parse_double(f[11], ctx);
    r.throughput = parse_double(f[12], ctx);
    r.slo_violations = parse_int<int>(f[13], ctx);
    r.predictor_overhead = parse_double(f[14], ctx);
    r.transfer_seconds = parse_double(f[15], ctx);
    r.peak_memory_bytes = parse_int<std::uint64_t>(f[16], ctx);
    r.steady_expert_bytes = parse_int<std::uint64_t>(f[17], ctx);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

ordered_json row_json(const SummaryRow& r) {
  ordered_json o;
  o["mode"] = to_string(r.point.mode);
  o["budget_fraction"] = r.point.budget_fraction;
  o["invocation_period"] = r.point.invocation_period;
  o["arrival_rate"] = r.point.arrival_rate;
  o["requests"] = r.requests;
  o["served"] = r.served;
  o["unserved"] = r.unserved;
  o["latency_p50"] = r.latency_p50;
  o["latency_p90"] = r.latency_p90;
  o["ttft_p50"] = r.ttft_p50;
  o["ttft_p90"] = r.ttft_p90;
  o["hit_rate"] = r.hit_rate;
  o["throughput"] = r.throughput;
  o["slo_violations"] = r.slo_violations;
  o["predictor_overhead"] = r.predictor_overhead;
  o["transfer_seconds"] = r.transfer_seconds;
  o["peak_memory_bytes"] = r.peak_memory_bytes;
  o["steady_expert_bytes"] = r.steady_expert_bytes;
  return o;
}

}  // namespace

void write_summary_json(const std::string& path, const std::vector<SummaryRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const SummaryRow& r : rows) arr.push_back(row_json(r));
  std::ofstream out = open_out(path);
  out << arr.dump(2) << '\n';
}

void write_metrics_json(const std::string& path, const SweepPoint& point, const Metrics& m) {
  ordered_json o;
  o["sweep_point"] = {{"mode", to_string(point.mode)},
                      {"budget_fraction", point.budget_fraction},
                      {"invocation_period", point.invocation_period},
                      {"arrival_rate", point.arrival_rate},
                      {"key", point.key()}};
  o["requests"] = m.requests;
  o["served"] = m.served;
  o["unserved"] = m.unserved;
  o["total_tokens"] = m.total_tokens;
  o["generated_tokens"] = m.generated_tokens;
  o["makespan"] = m.makespan;
  o["latency_mean"] = m.latency_mean;
  o["latency_p50"] = m.latency_p50;
  o["latency_p90"] = m.latency_p90;
  o["ttft_p50"] = m.ttft_p50;
  o["ttft_p90"] = m.ttft_p90;
  o["throughput"] = m.throughput;
  o["routing_decisions"] = m.routing_decisions;
  o["routing_hits"] = m.routing_hits;
  o["hit_rate"] = m.hit_rate;
  o["slo_violations"] = m.slo_violations;
  o["predictor_busy_seconds"] = m.predictor_busy_seconds;
  o["transfer_seconds"] = m.transfer_seconds;
  o["peak_memory_bytes"] = m.peak_memory_bytes;
  o["steady_expert_bytes"] = m.steady_expert_bytes;
  std::ofstream out = open_out(path);
  out << o.dump(2) << '\n';
}

void write_requests_csv(const std::string& path, const Metrics& m) {
  std::ofstream out = open_out(path);
  out << "request_id,task_id,arrival,admit_time,first_token_time,completion_time,"
         "input_tokens,generated_tokens,slo_ttft,served,slo_violated,latency,ttft\n";
  for (const RequestOutcome& o : m.outcomes) {
    out << o.request_id << ',' << o.task_id << ',' << fmt_double(o.arrival) << ','
        << fmt_double(o.admit_time) << ',' << fmt_double(o.first_token_time) << ','
        << fmt_double(o.completion_time) << ',' << o.input_tokens << ','
        << o.generated_tokens << ',' << fmt_double(o.slo_ttft) << ','
        << (o.served ? 1 : 0) << ',' << (o.slo_violated ? 1 : 0) << ','
        << fmt_double(o.latency()) << ',' << fmt_double(o.ttft()) << '\n';
  }
}

void write_events_csv(const std::string& path, const std::vector<EventRecord>& events) {
  std::ofstream out = open_out(path);
  out << "time,event,request_id,layer,a,b,detail\n";
  for (const EventRecord& ev : events) {
    out << fmt_double(ev.time) << ',' << ev.event << ',' << ev.request_id << ',' << ev.layer
        << ',' << fmt_double(ev.a) << ',' << fmt_double(ev.b) << ',' << ev.detail << '\n';
  }
}

void write_memory_csv(const std::string& path, const std::vector<MemorySample>& samples) {
  std::ofstream out = open_out(path);
  out << "time,total_bytes,expert_bytes\n";
  for (const MemorySample& s : samples)
    out << fmt_double(s.time) << ',' << s.total_bytes << ',' << s.expert_bytes << '\n';
}

void write_snapshots_jsonl(const std::string& path,
                           const std::vector<PlacementSnapshot>& snaps) {
  std::ofstream out = open_out(path);
  for (const PlacementSnapshot& s : snaps) {
    ordered_json o;
    o["time"] = s.time;
    o["invocation"] = s.invocation;
    o["layer"] = s.layer;
    o["residents"] = s.residents;
    o["layer_bytes"] = s.layer_bytes;
    out << o.dump() << '\n';
  }
}

void save_trace(const RoutingTrace& trace, const std::string& path) {
  std::ofstream out = open_out(path);
  ordered_json header;
  header["schema_version"] = 1;
  header["num_layers"] = trace.num_layers;
  header["top_k"] = trace.top_k;
  out << header.dump() << '\n';
  for (const auto& prompt : trace.experts) out << ordered_json(prompt).dump() << '\n';
}

RoutingTrace load_trace(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty trace file");
  RoutingTrace trace;
  try {
    ordered_json header = ordered_json::parse(line);
    if (header.value("schema_version", 0) != 1)
      throw ValidationError(path + ": trace schema_version: expected 1");
    trace.num_layers = header.at("num_layers").get<int>();
    trace.top_k = header.at("top_k").get<int>();
  } catch (const ordered_json::exception& e) {
    throw ValidationError(path + ":1: bad trace header: " + e.what());
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      trace.experts.push_back(
          ordered_json::parse(line).get<std::vector<std::vector<std::vector<int>>>>());
    } catch (const ordered_json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": bad trace line: " +
                            e.what());
    }
    const auto& prompt = trace.experts.back();
    if (static_cast<int>(prompt.size()) != trace.num_layers)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": prompt has wrong layer count");
    for (const auto& layer : prompt)
      for (const auto& tok : layer)
        if (static_cast<int>(tok.size()) != trace.top_k)
          throw ValidationError(path + ":" + std::to_string(line_no) +
                                ": token without top_k experts");
  }
  return trace;
}

std::vector<ComparisonRow> compare_rows(const std::vector<SummaryRow>& rows) {
  std::map<std::pair<int, double>, const SummaryRow*> baselines;
  for (const SummaryRow& r : rows) {
    if (r.point.mode != Mode::baseline) continue;
    auto key = std::make_pair(r.point.invocation_period, r.point.arrival_rate);
    if (baselines.find(key) == baselines.end()) baselines[key] = &r;
  }
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  std::vector<ComparisonRow> out;
  for (const SummaryRow& r : rows) {
    auto key = std::make_pair(r.point.invocation_period, r.point.arrival_rate);
    auto it = baselines.find(key);
    if (it == baselines.end())
      throw ValidationError("comparison: no baseline row for invocation_period=" +
                            std::to_string(r.point.invocation_period) + " arrival_rate=" +
                            fmt_double(r.point.arrival_rate));
    const SummaryRow& base = *it->second;
    ComparisonRow c;
    c.point = r.point;
    c.latency_ratio = ratio(r.latency_p50, base.latency_p50);
    c.memory_ratio = ratio(static_cast<double>(r.steady_expert_bytes),
                           static_cast<double>(base.steady_expert_bytes));
    c.throughput_ratio = ratio(r.throughput, base.throughput);
    c.hit_rate = r.hit_rate;
    c.baseline_latency_p50 = base.latency_p50;
    out.push_back(c);
  }
  return out;
}

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows) {
  std::ofstream out = open_out(path);
  out << "mode,budget_fraction,invocation_period,arrival_rate,latency_ratio,memory_ratio,"
         "throughput_ratio,hit_rate,baseline_latency_p50\n";
  for (const ComparisonRow& r : rows) {
    out << to_string(r.point.mode) << ',' << fmt_double(r.point.budget_fraction) << ','
        << r.point.invocation_period << ',' << fmt_double(r.point.arrival_rate) << ','
        << fmt_double(r.latency_ratio) << ',' << fmt_double(r.memory_ratio) << ','
        << fmt_double(r.throughput_ratio) << ',' << fmt_double(r.hit_rate) << ','
        << fmt_double(r.baseline_latency_p50) << '\n';
  }
}

}  // namespace moesim
