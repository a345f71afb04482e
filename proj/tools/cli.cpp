#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "flowinfer/experiments.hpp"

namespace flowinfer::cli {

namespace {

struct Options {
  std::string config_path;
  std::string out_path;
  std::string summary_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool check = false;
  std::size_t samples = 100;
};

// Writes to --out when given, else to the default stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::invalid_argument("cannot open output file: " + path);
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

std::vector<Scenario> load(const Options& o) {
  return load_scenarios_file(o.config_path, o.overrides, o.seed);
}

int cmd_bootstrap(const Options& o, std::ostream& out) {
  Json arr = Json::array();
  for (const auto& s : load(o)) {
    const auto boot = bootstrap_thresholds(calibration_factory(s, 0), s.attacker.bootstrap,
                                           s.attacker.max_rate);
    Json samples = Json::array();
    for (const auto& b : boot.samples) {
      samples.push_back({{"t1_ms", to_ms(b.t1)},
                         {"t2_ms", to_ms(b.t2)},
                         {"t3_ms", to_ms(b.t3)},
                         {"fillers", b.fillers},
                         {"ts3_ms", to_ms(b.ts3)}});
    }
    arr.push_back({{"scenario", s.name},
                   {"thresholds", thresholds_to_json(boot.thresholds)},
                   {"samples", samples}});
  }
  Sink sink(o.out_path, out);
  sink.stream() << arr.dump(2) << '\n';
  return kOk;
}

int cmd_measure_timeouts(const Options& o, std::ostream& out) {
  Json arr = Json::array();
  for (const auto& s : load(o)) {
    const auto factory = calibration_factory(s, 0);
    const auto boot = bootstrap_thresholds(factory, s.attacker.bootstrap, s.attacker.max_rate);
    Json j = {{"scenario", s.name}, {"thresholds", thresholds_to_json(boot.thresholds)}};
    auto idle_target = factory(s.attacker.bootstrap.repeat);
    ProbeSession idle_session(*idle_target, s.attacker.max_rate);
    std::optional<Micros> idle;
    try {
      idle = measure_idle_timeout(idle_session, boot.thresholds, s.attacker.idle);
      j["idle_timeout_ms"] = to_ms(*idle);
    } catch (const AttackError& e) {
      if (e.code() != AttackErrc::TimeoutDisabled) throw;
      j["idle_timeout_ms"] = nullptr;
    }
    auto hp = s.attacker.hard;
    if (idle) {
      hp.probe_gap = std::min(hp.probe_gap, *idle / 10);
      hp.known_idle = idle;
    }
    auto hard_target = factory(s.attacker.bootstrap.repeat + 1);
    ProbeSession hard_session(*hard_target, s.attacker.max_rate);
    try {
      j["hard_timeout_ms"] = to_ms(measure_hard_timeout(hard_session, boot.thresholds, hp));
    } catch (const AttackError& e) {
      if (e.code() != AttackErrc::TimeoutDisabled) throw;
      j["hard_timeout_ms"] = nullptr;
    }
    arr.push_back(j);
  }
  Sink sink(o.out_path, out);
  sink.stream() << arr.dump(2) << '\n';
  return kOk;
}

int cmd_infer(const Options& o, std::ostream& out, std::ostream& err) {
  Json arr = Json::array();
  bool all_ok = true;
  for (const auto& s : load(o)) {
    const auto run = run_repeat(s, 0);
    Json j = run_to_json(run);
    j["scenario"] = s.name;
    arr.push_back(j);
    if (!run.ok) {
      err << s.name << ": " << run.error << '\n';
      all_ok = false;
    }
  }
  Sink sink(o.out_path, out);
  sink.stream() << arr.dump(2) << '\n';
  return all_ok ? kOk : kDomainError;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const auto scenarios = load(o);
  std::vector<SweepResult> results;
  std::vector<BoundCheck> checks;
  for (const auto& s : scenarios) {
    results.push_back(run_scenario(s));
    if (o.check) {
      auto c = evaluate_bounds(s, results.back());
      checks.insert(checks.end(), c.begin(), c.end());
    }
  }
  {
    Sink sink(o.out_path, out);
    write_runs_csv(sink.stream(), results);
  }
  const auto summary = sweep_summary_json(results, checks);
  if (!o.summary_path.empty()) {
    Sink s(o.summary_path, err);
    s.stream() << summary.dump(2) << '\n';
  } else {
    err << summary.dump(2) << '\n';
  }
  if (!o.check) return kOk;
  bool all = true;
  for (const auto& c : checks) {
    if (!c.passed) {
      err << "FAIL " << c.scenario << ' ' << c.metric << " = " << c.value << " (want " << c.limit
          << ")\n";
      all = false;
    }
  }
  return all ? kOk : kDomainError;
}

int cmd_characterize(const Options& o, std::ostream& out) {
  Json arr = Json::array();
  for (const auto& s : load(o)) {
    auto model = s.sw.latency;
    model.seed = mix_seed(s.seed, 0xc4a2);
    Json j = characterization_to_json(rtt_characterization(model, o.samples));
    j["scenario"] = s.name;
    arr.push_back(j);
  }
  Sink sink(o.out_path, out);
  sink.stream() << arr.dump(2) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow-table capacity and usage inference over a simulated SDN switch", "flowinfer"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Scenario config file (JSON)")->required();
    sub->add_option("--out", o.out_path, "Output file (default: stdout)");
    sub->add_option("--seed", o.seed, "Override the scenario seed");
    sub->add_option("--set", o.overrides, "Override a config value, e.g. latency.noise=none")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_flag("--check", o.check, "Acceptance mode: exit 1 if a configured bound is violated");
  };

  auto* bootstrap = app.add_subcommand("bootstrap", "Calibrate RTT thresholds");
  auto* timeouts = app.add_subcommand("measure-timeouts", "Measure idle and hard timeouts");
  auto* infer = app.add_subcommand("infer", "Infer capacity and usage (one run per scenario)");
  auto* sweep = app.add_subcommand("sweep", "Run every scenario's repeats; CSV per run");
  auto* characterize = app.add_subcommand("characterize-rtt", "Per-branch RTT distribution");
  auto* check = app.add_subcommand("check", "Sweep with acceptance bounds enforced");
  for (auto* sub : {bootstrap, timeouts, infer, sweep, characterize, check}) add_common(sub);
  for (auto* sub : {sweep, check}) {
    sub->add_option("--summary", o.summary_path, "Summary JSON file (default: stderr)");
  }
  characterize->add_option("--samples", o.samples, "Samples per branch")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  }

  try {
    if (bootstrap->parsed()) return cmd_bootstrap(o, out);
    if (timeouts->parsed()) return cmd_measure_timeouts(o, out);
    if (infer->parsed()) return cmd_infer(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    if (characterize->parsed()) return cmd_characterize(o, out);
    if (check->parsed()) {
      o.check = true;
      return cmd_sweep(o, out, err);
    }
  } catch (const AttackError& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  }
  err << app.help();
  return kUsageError;
}

}  // namespace flowinfer::cli
