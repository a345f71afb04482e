#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowinfer/attacker.hpp"
#include "flowinfer/scenario.hpp"

namespace flowinfer {

/// Derived per-run switch: the repeat index is added to the scenario seed and
/// split into independent latency and background streams.
SwitchConfig switch_for_run(const Scenario& s, unsigned repeat, std::uint64_t stream = 0);

/// Factory of identically configured calibration switches for one run.
SessionFactory calibration_factory(const Scenario& s, unsigned repeat);

struct TimeoutMeasurement {
  Micros idle{0};  // 0: no expiry observed up to the ceiling
  Micros hard{0};
};

struct RunRecord {
  unsigned repeat = 0;
  bool ok = false;
  std::string error;
  RttThresholds thresholds;
  TimeoutMeasurement timeouts;
  FeasibilityVerdict feasibility;
  InferenceReport report;
  std::uint64_t wall_events = 0;
};

struct SweepResult {
  std::string scenario;
  Policy policy = Policy::FIFO;
  std::size_t truth_capacity = 0;
  std::size_t truth_usage = 0;
  std::vector<RunRecord> runs;
  std::size_t ok_runs = 0;
  double mean_capacity = 0;
  double mean_usage = 0;
  double capacity_rel_error = 0;  // |mean - truth| / truth
  double usage_rel_error = 0;
  double max_run_capacity_rel_error = 0;
  double max_run_usage_rel_error = 0;
};

/// |value - truth| / truth; 0 when both are 0, +inf when only truth is 0.
double relative_error(double value, double truth);

/// Bootstrap, timeout measurement, feasibility and inference for one repeat.
/// Attack failures are recorded in the returned record, never thrown.
RunRecord run_repeat(const Scenario& s, unsigned repeat);

SweepResult aggregate(const Scenario& s, std::vector<RunRecord> runs);

/// Repeats run in parallel (OpenMP) on independent simulators.
SweepResult run_scenario(const Scenario& s);

/// Single-threaded reference for run_scenario; results are identical.
SweepResult run_scenario_serial(const Scenario& s);

struct BoundCheck {
  std::string scenario;
  std::string metric;
  double value = 0;
  std::string limit;
  bool passed = false;
};

std::vector<BoundCheck> evaluate_bounds(const Scenario& s, const SweepResult& r);

/// One row per run: scenario,repeat,truth_capacity,inferred_capacity,
/// truth_usage,inferred_usage,n1,n2,probes_sent,wall_events. Failed runs
/// leave the inferred columns empty.
void write_runs_csv(std::ostream& out, const std::vector<SweepResult>& results);

Json sweep_summary_json(const std::vector<SweepResult>& results,
                        const std::vector<BoundCheck>& checks = {});
Json run_to_json(const RunRecord& r);
Json thresholds_to_json(const RttThresholds& t);

// ---------------------------------------------------------------------------

struct BranchSummary {
  Branch branch = Branch::Hit;
  std::vector<Micros> samples;  // in collection order
  double min_ms = 0;
  double max_ms = 0;
  double mean_ms = 0;
  /// (rtt_us, cumulative fraction) at each distinct sample value.
  std::vector<std::pair<std::int64_t, double>> cdf;
};

struct RttCharacterization {
  std::vector<BranchSummary> branches;  // empty when n == 0
};

/// Collects n samples per processing branch from a dedicated switch using
/// `model`.
RttCharacterization rtt_characterization(const LatencyModel& model, std::size_t n_per_state);

Json characterization_to_json(const RttCharacterization& c);

}  // namespace flowinfer
