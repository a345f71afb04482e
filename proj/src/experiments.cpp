#include "flowinfer/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowinfer {

SwitchConfig switch_for_run(const Scenario& s, unsigned repeat, std::uint64_t stream) {
  SwitchConfig cfg = s.sw;
  const std::uint64_t run_seed = s.seed + repeat;
  cfg.latency.seed = mix_seed(run_seed, 2 * stream + 1);
  cfg.background.seed = mix_seed(run_seed, 2 * stream + 2);
  return cfg;
}

SessionFactory calibration_factory(const Scenario& s, unsigned repeat) {
  return [s, repeat](unsigned k) { return make_probe_target(switch_for_run(s, repeat, 16 + k)); };
}

double relative_error(double value, double truth) {
  if (truth == 0) return value == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(value - truth) / truth;
}

namespace {

Micros min_finite(Micros a, Micros b) {
  if (a.count() <= 0) return b;
  if (b.count() <= 0) return a;
  return std::min(a, b);
}

Micros measure_or_zero(const auto& measure) {
  try {
    return measure();
  } catch (const AttackError& e) {
    if (e.code() != AttackErrc::TimeoutDisabled) throw;
    return Micros{0};
  }
}

}  // namespace

RunRecord run_repeat(const Scenario& s, unsigned repeat) {
  RunRecord rec;
  rec.repeat = repeat;
  const auto& ac = s.attacker;
  try {
    const auto factory = calibration_factory(s, repeat);
    const auto boot = bootstrap_thresholds(factory, ac.bootstrap, ac.max_rate);
    rec.thresholds = boot.thresholds;

    if (ac.measure_timeouts) {
      auto idle_target = factory(ac.bootstrap.repeat);
      ProbeSession idle_session(*idle_target, ac.max_rate);
      rec.timeouts.idle = measure_or_zero(
          [&] { return measure_idle_timeout(idle_session, rec.thresholds, ac.idle); });

      HardTimeoutParams hp = ac.hard;
      if (rec.timeouts.idle.count() > 0) {
        hp.probe_gap = std::min(hp.probe_gap, rec.timeouts.idle / 10);
        hp.known_idle = rec.timeouts.idle;
      }
      auto hard_target = factory(ac.bootstrap.repeat + 1);
      ProbeSession hard_session(*hard_target, ac.max_rate);
      rec.timeouts.hard =
          measure_or_zero([&] { return measure_hard_timeout(hard_session, rec.thresholds, hp); });
    }

    std::size_t guess = ac.capacity_guess;
    if (guess == 0) {
      for (const auto& b : boot.samples) guess = std::max(guess, b.fillers + 1);
    }
    rec.feasibility =
        check_feasibility(guess, rec.timeouts.hard, rec.timeouts.idle, ac.max_rate);
    if (!rec.feasibility.feasible) {
      rec.error = "infeasible: required " + std::to_string(rec.feasibility.v_gen_required) +
                  " pkt/s exceeds " + std::to_string(ac.max_rate) + " pkt/s";
      return rec;
    }

    Simulator sim(switch_for_run(s, repeat));
    SimulatorProbe probe(sim);
    ProbeSession session(probe, ac.max_rate);
    InferenceParams ip;
    ip.key_budget = ac.key_budget;
    ip.full_debounce = ac.full_debounce;
    if (const auto t = min_finite(rec.timeouts.hard, rec.timeouts.idle); t.count() > 0) {
      ip.min_timeout = t;
    }
    rec.report = s.sw.policy == Policy::FIFO ? infer_fifo(session, rec.thresholds, ip)
                                             : infer_lru(session, rec.thresholds, ip);
    rec.wall_events = sim.events_processed();
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

SweepResult aggregate(const Scenario& s, std::vector<RunRecord> runs) {
  SweepResult r;
  r.scenario = s.name;
  r.policy = s.sw.policy;
  r.truth_capacity = s.sw.capacity;
  r.truth_usage = s.sw.background.initial_usage;
  r.runs = std::move(runs);
  double cap_sum = 0, usage_sum = 0;
  for (const auto& run : r.runs) {
    if (!run.ok) continue;
    ++r.ok_runs;
    const double cap = static_cast<double>(run.report.f_capacity);
    const double usage = static_cast<double>(run.report.f_other);
    cap_sum += cap;
    usage_sum += usage;
    r.max_run_capacity_rel_error =
        std::max(r.max_run_capacity_rel_error, relative_error(cap, static_cast<double>(r.truth_capacity)));
    r.max_run_usage_rel_error =
        std::max(r.max_run_usage_rel_error, relative_error(usage, static_cast<double>(r.truth_usage)));
  }
  if (r.ok_runs > 0) {
    r.mean_capacity = cap_sum / static_cast<double>(r.ok_runs);
    r.mean_usage = usage_sum / static_cast<double>(r.ok_runs);
    r.capacity_rel_error = relative_error(r.mean_capacity, static_cast<double>(r.truth_capacity));
    r.usage_rel_error = relative_error(r.mean_usage, static_cast<double>(r.truth_usage));
  } else {
    r.capacity_rel_error = r.usage_rel_error = std::numeric_limits<double>::infinity();
  }
  return r;
}

SweepResult run_scenario(const Scenario& s) {
  s.validate();
  std::vector<RunRecord> runs(s.repeats);
  const int n = static_cast<int>(s.repeats);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) runs[i] = run_repeat(s, static_cast<unsigned>(i));
  return aggregate(s, std::move(runs));
}

SweepResult run_scenario_serial(const Scenario& s) {
  s.validate();
  std::vector<RunRecord> runs;
  runs.reserve(s.repeats);
  for (unsigned i = 0; i < s.repeats; ++i) runs.push_back(run_repeat(s, i));
  return aggregate(s, std::move(runs));
}

// ---------------------------------------------------------------------------

std::vector<BoundCheck> evaluate_bounds(const Scenario& s, const SweepResult& r) {
  std::vector<BoundCheck> out;
  auto upper = [&](const char* metric, double value, std::optional<double> limit) {
    if (!limit) return;
    out.push_back({s.name, metric, value, "<= " + std::to_string(*limit), value <= *limit});
  };
  const auto& b = s.bounds;
  upper("capacity_mean_rel_error", r.capacity_rel_error, b.capacity_mean_rel_error);
  upper("usage_mean_rel_error", r.usage_rel_error, b.usage_mean_rel_error);
  upper("capacity_run_rel_error", r.max_run_capacity_rel_error, b.capacity_run_rel_error);
  upper("usage_run_rel_error", r.max_run_usage_rel_error, b.usage_run_rel_error);
  if (b.capacity_mean_range) {
    const auto [lo, hi] = *b.capacity_mean_range;
    out.push_back({s.name, "capacity_mean", r.mean_capacity,
                   "in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                   r.ok_runs > 0 && r.mean_capacity >= lo && r.mean_capacity <= hi});
  }
  if (b.require_all_runs_ok) {
    out.push_back({s.name, "ok_runs", static_cast<double>(r.ok_runs),
                   "== " + std::to_string(r.runs.size()), r.ok_runs == r.runs.size()});
  }
  return out;
}

void write_runs_csv(std::ostream& out, const std::vector<SweepResult>& results) {
  out << "scenario,repeat,truth_capacity,inferred_capacity,truth_usage,inferred_usage,n1,n2,"
         "probes_sent,wall_events\n";
  for (const auto& r : results) {
    for (const auto& run : r.runs) {
      out << r.scenario << ',' << run.repeat << ',' << r.truth_capacity << ',';
      if (run.ok) out << run.report.f_capacity;
      out << ',' << r.truth_usage << ',';
      if (run.ok) {
        out << run.report.f_other << ',' << run.report.n1 << ',' << run.report.n2 << ','
            << run.report.probes_sent;
      } else {
        out << ",,,";
      }
      out << ',' << run.wall_events << '\n';
    }
  }
}

Json thresholds_to_json(const RttThresholds& t) {
  return {{"t1_ms", t.t1_ms},
          {"t2_ms", t.t2_ms},
          {"t3_ms", t.t3_ms},
          {"hit_cut_ms", t.hit_cut_ms},
          {"full_cut_ms", t.full_cut_ms}};
}

Json run_to_json(const RunRecord& r) {
  Json j = {{"repeat", r.repeat}, {"ok", r.ok}};
  if (!r.error.empty()) j["error"] = r.error;
  j["thresholds"] = thresholds_to_json(r.thresholds);
  j["timeouts"] = {{"idle_ms", to_ms(r.timeouts.idle)}, {"hard_ms", to_ms(r.timeouts.hard)}};
  j["feasibility"] = {{"v_gen_required", r.feasibility.v_gen_required},
                      {"v_gen_available", r.feasibility.v_gen_available},
                      {"feasible", r.feasibility.feasible}};
  if (r.ok) {
    const auto& rep = r.report;
    j["report"] = {{"f_capacity", rep.f_capacity},
                   {"f_other", rep.f_other},
                   {"n1", rep.n1},
                   {"n2", rep.n2},
                   {"probes_sent", rep.probes_sent},
                   {"policy_assumed", std::string(to_string(rep.policy_assumed))},
                   {"detection_probes", rep.detection_probes},
                   {"rolling_probes", rep.rolling_probes},
                   {"elapsed_ms", to_ms(rep.elapsed)},
                   {"exceeded_timeout_window", rep.exceeded_timeout_window}};
  }
  j["wall_events"] = r.wall_events;
  return j;
}

Json sweep_summary_json(const std::vector<SweepResult>& results,
                        const std::vector<BoundCheck>& checks) {
  Json scenarios = Json::array();
  for (const auto& r : results) {
    Json failures = Json::array();
    for (const auto& run : r.runs) {
      if (!run.ok) failures.push_back({{"repeat", run.repeat}, {"error", run.error}});
    }
    scenarios.push_back({{"scenario", r.scenario},
                         {"policy", std::string(to_string(r.policy))},
                         {"truth_capacity", r.truth_capacity},
                         {"truth_usage", r.truth_usage},
                         {"runs", r.runs.size()},
                         {"ok_runs", r.ok_runs},
                         {"mean_capacity", r.mean_capacity},
                         {"mean_usage", r.mean_usage},
                         {"capacity_rel_error", r.capacity_rel_error},
                         {"usage_rel_error", r.usage_rel_error},
                         {"max_run_capacity_rel_error", r.max_run_capacity_rel_error},
                         {"max_run_usage_rel_error", r.max_run_usage_rel_error},
                         {"failures", failures}});
  }
  Json j = {{"scenarios", scenarios}};
  if (!checks.empty()) {
    Json cj = Json::array();
    bool all = true;
    for (const auto& c : checks) {
      all = all && c.passed;
      cj.push_back({{"scenario", c.scenario},
                    {"metric", c.metric},
                    {"value", c.value},
                    {"limit", c.limit},
                    {"passed", c.passed}});
    }
    j["checks"] = cj;
    j["all_passed"] = all;
  }
  return j;
}

// ---------------------------------------------------------------------------

namespace {

BranchSummary summarize(Branch b, std::vector<Micros> samples) {
  BranchSummary s;
  s.branch = b;
  s.samples = std::move(samples);
  if (s.samples.empty()) return s;
  auto sorted = s.samples;
  std::sort(sorted.begin(), sorted.end());
  s.min_ms = to_ms(sorted.front());
  s.max_ms = to_ms(sorted.back());
  double sum = 0;
  for (auto v : sorted) sum += to_ms(v);
  s.mean_ms = sum / static_cast<double>(sorted.size());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    s.cdf.emplace_back(sorted[i].count(), static_cast<double>(i + 1) / n);
  }
  return s;
}

}  // namespace

RttCharacterization rtt_characterization(const LatencyModel& model, std::size_t n_per_state) {
  RttCharacterization out;
  if (n_per_state == 0) return out;
  // n + 1 slots: n fresh keys fill all but one, re-probing them gives hits,
  // one filler completes the table, then n fresh keys all hit a full table.
  SwitchConfig cfg;
  cfg.capacity = n_per_state + 1;
  cfg.policy = Policy::FIFO;
  cfg.latency = model;
  Simulator sim(cfg);
  KeySource keys;
  std::map<Branch, std::vector<Micros>> by_branch;
  VirtualTime t{0};
  const Micros step{20'000};
  auto send = [&](const FlowKey& k) {
    const auto s = sim.send_probe(k, t);
    t += step;
    by_branch[s.branch].push_back(s.rtt);
  };
  std::vector<FlowKey> first;
  for (std::size_t i = 0; i < n_per_state; ++i) {
    first.push_back(keys.next());
    send(first.back());
  }
  for (const auto& k : first) send(k);
  sim.send_probe(keys.next(), t);
  t += step;
  for (std::size_t i = 0; i < n_per_state; ++i) send(keys.next());

  for (auto b : {Branch::Hit, Branch::MissNotFull, Branch::MissFull}) {
    out.branches.push_back(summarize(b, by_branch[b]));
  }
  return out;
}

Json characterization_to_json(const RttCharacterization& c) {
  Json branches = Json::array();
  for (const auto& b : c.branches) {
    Json cdf = Json::array();
    for (const auto& [us, frac] : b.cdf) cdf.push_back({us, frac});
    branches.push_back({{"branch", std::string(to_string(b.branch))},
                        {"count", b.samples.size()},
                        {"min_ms", b.min_ms},
                        {"max_ms", b.max_ms},
                        {"mean_ms", b.mean_ms},
                        {"cdf", cdf}});
  }
  return {{"branches", branches}};
}

}  // namespace flowinfer
