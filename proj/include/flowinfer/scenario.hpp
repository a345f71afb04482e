#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowinfer/attacker.hpp"
#include "flowinfer/simulator.hpp"
#include "json.hpp"

namespace flowinfer {

/// Attacker-side knobs for the full pipeline.
struct AttackerConfig {
  double max_rate = 10'000.0;  // packets/s
  std::size_t key_budget = 100'000;
  unsigned full_debounce = 1;
  /// 0: estimate from the bootstrap filler count.
  std::size_t capacity_guess = 0;
  bool measure_timeouts = true;
  BootstrapParams bootstrap;
  IdleTimeoutParams idle;
  HardTimeoutParams hard;
};

/// Acceptance bounds checked in --check mode. Unset bounds are not checked.
struct Bounds {
  std::optional<double> capacity_mean_rel_error;
  std::optional<double> usage_mean_rel_error;
  std::optional<double> capacity_run_rel_error;
  std::optional<double> usage_run_rel_error;
  std::optional<std::pair<double, double>> capacity_mean_range;
  bool require_all_runs_ok = true;
};

struct Scenario {
  std::string name = "scenario";
  SwitchConfig sw;
  unsigned repeats = 1;
  std::uint64_t seed = 1;
  AttackerConfig attacker;
  Bounds bounds;

  /// Throws std::invalid_argument on initial_usage > capacity, repeats == 0,
  /// or an invalid latency model.
  void validate() const;
};

using Json = nlohmann::json;

/// Applies one dotted-path override (e.g. "latency.noise=none") to a config
/// document. The value is read as JSON when it parses, else as a string.
void apply_override(Json& doc, const std::string& assignment);

/// Parses one scenario object. Missing fields keep their defaults.
Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const Scenario& s);

/// A config document is either a single scenario object or
/// {"defaults": {...}, "scenarios": [{...}, ...]}; each scenario is merged
/// onto the defaults. A scenario carrying "sweep": {"field": F, "values": [...]}
/// expands to one scenario per value. Overrides apply to every scenario after
/// merging.
std::vector<Scenario> load_scenarios(const Json& doc, const std::vector<std::string>& overrides = {},
                                     std::optional<std::uint64_t> seed = std::nullopt);
std::vector<Scenario> load_scenarios_file(const std::string& path,
                                          const std::vector<std::string>& overrides = {},
                                          std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace flowinfer
