#include "moesim/driver.hpp"

#include <filesystem>
#include <future>
#include <iostream>
#include <vector>

#include "moesim/report.hpp"

namespace moesim {

namespace fs = std::filesystem;

namespace {

struct PointResult {
  SweepPoint point;
  bool ok = false;
  SummaryRow row;
  std::string error;
};

PointResult run_point(const Scenario& scenario, const SweepPoint& point,
                      const std::string& output_dir) {
  PointResult res;
  res.point = point;
  try {
    RunInputs inputs = build_run_inputs(scenario, point);
    RunResult run_result = run(inputs);
    const std::string stem = (fs::path(output_dir) / point.key()).string();
    write_metrics_json(stem + ".metrics.json", point, run_result.metrics);
    write_requests_csv(stem + ".requests.csv", run_result.metrics);
    write_events_csv(stem + ".events.csv", run_result.events);
    write_memory_csv(stem + ".memory.csv", run_result.memory);
    write_snapshots_jsonl(stem + ".snapshots.jsonl", run_result.snapshots);
    res.row = make_summary_row(point, run_result.metrics);
    res.ok = true;
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

}  // namespace

int run_scenario(const std::string& config_path, const std::string& output_dir,
                 const RunOverrides& overrides) {
  Scenario scenario = load_scenario(config_path);
  if (overrides.seed) scenario.engine.seed = *overrides.seed;
  if (overrides.mode) scenario.sweep.modes = {*overrides.mode};

  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec || !fs::is_directory(output_dir))
    throw std::runtime_error("cannot create output directory " + output_dir);

  // resolve once up front so parallel points reuse the cached calibration
  resolve_calibration(scenario);

  std::vector<SweepPoint> points = expand_sweep(scenario);
  std::vector<std::future<PointResult>> futures;
  futures.reserve(points.size());
  for (const SweepPoint& point : points)
    futures.push_back(std::async(std::launch::async, run_point, std::cref(scenario), point,
                                 output_dir));

  std::vector<SummaryRow> rows;
  int failed = 0;
  for (auto& f : futures) {
    PointResult res = f.get();  // futures complete in sweep order: summary stays deterministic
    if (res.ok) {
      rows.push_back(res.row);
      if (!overrides.quiet) std::cout << "[ok] " << res.point.key() << '\n';
    } else {
      ++failed;
      std::cerr << "[failed] " << res.point.key() << ": " << res.error << '\n';
    }
  }
  write_summary_csv((fs::path(output_dir) / "summary.csv").string(), rows);
  write_summary_json((fs::path(output_dir) / "summary.json").string(), rows);
  if (!overrides.quiet)
    std::cout << rows.size() << " sweep point(s) written to " << output_dir << '\n';
  return failed;
}

void compare_modes(const std::string& summary_path, const std::string& explicit_out) {
  std::vector<SummaryRow> rows = read_summary_csv(summary_path);
  std::vector<ComparisonRow> comparison = compare_rows(rows);
  std::string out = explicit_out;
  if (out.empty())
    out = (fs::path(summary_path).parent_path() / "comparison.csv").string();
  write_comparison_csv(out, comparison);
}

}  // namespace moesim
