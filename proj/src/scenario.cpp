#include "flowinfer/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace flowinfer {

namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (auto name : known) ok = ok || k == name;
    if (!ok) throw std::invalid_argument("unknown config key '" + k + "' in " + std::string(where));
  }
}

Micros ms_field(const Json& j, const char* key, Micros fallback) {
  return j.contains(key) ? from_ms(j.at(key).get<double>()) : fallback;
}

Micros s_field(const Json& j, const char* key, Micros fallback) {
  return j.contains(key) ? from_ms(j.at(key).get<double>() * 1000.0) : fallback;
}

LatencyRange range_field(const Json& j, const char* key, LatencyRange fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) {
    throw std::invalid_argument(std::string("latency.") + key + " must be [min, max]");
  }
  return {a[0].get<double>(), a[1].get<double>()};
}

// Dotted path -> nested object, creating intermediate objects.
Json& walk(Json& doc, const std::string& path) {
  Json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw std::invalid_argument("empty path segment in override '" + path + "'");
    if (node->is_null()) *node = Json::object();
    if (!node->is_object()) throw std::invalid_argument("override path '" + path + "' crosses a non-object");
    node = &(*node)[part];
  }
  return *node;
}

}  // namespace

void Scenario::validate() const {
  if (sw.capacity == 0) throw std::invalid_argument(name + ": capacity must be positive");
  if (sw.background.initial_usage > sw.capacity) {
    throw std::invalid_argument(name + ": initial_usage exceeds capacity");
  }
  if (repeats == 0) throw std::invalid_argument(name + ": repeats must be >= 1");
  if (!(sw.background.arrival_rate >= 0)) {
    throw std::invalid_argument(name + ": background_rate must be >= 0");
  }
  if (!(attacker.max_rate > 0)) throw std::invalid_argument(name + ": attacker.max_rate must be > 0");
  sw.latency.validate();
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like key=value: '" + assignment + "'");
  }
  const auto value = assignment.substr(eq + 1);
  Json parsed = Json::parse(value, nullptr, /*allow_exceptions=*/false);
  walk(doc, assignment.substr(0, eq)) = parsed.is_discarded() ? Json(value) : parsed;
}

Scenario scenario_from_json(const Json& j) {
  reject_unknown(j,
                 {"name", "policy", "capacity", "initial_usage", "initial_usage_fraction",
                  "background_rate", "timeouts", "latency", "repeats", "seed", "attacker", "bounds",
                  "sweep"},
                 "scenario");
  Scenario s;
  s.name = j.value("name", s.name);
  if (j.contains("policy")) s.sw.policy = parse_policy(j.at("policy").get<std::string>());
  s.sw.capacity = j.value("capacity", s.sw.capacity);
  s.sw.background.initial_usage = j.value("initial_usage", s.sw.background.initial_usage);
  if (j.contains("initial_usage_fraction")) {
    s.sw.background.initial_usage = static_cast<std::size_t>(
        std::llround(j.at("initial_usage_fraction").get<double>() * static_cast<double>(s.sw.capacity)));
  }
  s.sw.background.arrival_rate = j.value("background_rate", s.sw.background.arrival_rate);
  s.repeats = j.value("repeats", s.repeats);
  s.seed = j.value("seed", s.seed);

  if (j.contains("timeouts")) {
    const auto& t = j.at("timeouts");
    reject_unknown(t, {"hard_ms", "idle_ms"}, "timeouts");
    s.sw.timeouts.hard = ms_field(t, "hard_ms", s.sw.timeouts.hard);
    s.sw.timeouts.idle = ms_field(t, "idle_ms", s.sw.timeouts.idle);
  }
  if (j.contains("latency")) {
    const auto& l = j.at("latency");
    reject_unknown(l, {"hit_ms", "miss_notfull_ms", "miss_full_ms", "noise"}, "latency");
    s.sw.latency.hit = range_field(l, "hit_ms", s.sw.latency.hit);
    s.sw.latency.miss_notfull = range_field(l, "miss_notfull_ms", s.sw.latency.miss_notfull);
    s.sw.latency.miss_full = range_field(l, "miss_full_ms", s.sw.latency.miss_full);
    if (l.contains("noise")) s.sw.latency.noise = parse_noise(l.at("noise").get<std::string>());
  }
  if (j.contains("attacker")) {
    const auto& a = j.at("attacker");
    reject_unknown(a,
                   {"max_rate", "key_budget", "full_debounce", "capacity_guess", "measure_timeouts",
                    "bootstrap", "idle", "hard"},
                   "attacker");
    auto& ac = s.attacker;
    ac.max_rate = a.value("max_rate", ac.max_rate);
    ac.key_budget = a.value("key_budget", ac.key_budget);
    ac.full_debounce = a.value("full_debounce", ac.full_debounce);
    ac.capacity_guess = a.value("capacity_guess", ac.capacity_guess);
    ac.measure_timeouts = a.value("measure_timeouts", ac.measure_timeouts);
    if (a.contains("bootstrap")) {
      const auto& b = a.at("bootstrap");
      reject_unknown(b, {"ts1_ms", "ts2_ms", "repeat", "filler_budget", "jump_factor", "jump_confirm"},
                     "attacker.bootstrap");
      ac.bootstrap.ts1 = ms_field(b, "ts1_ms", ac.bootstrap.ts1);
      ac.bootstrap.ts2 = ms_field(b, "ts2_ms", ac.bootstrap.ts2);
      ac.bootstrap.repeat = b.value("repeat", ac.bootstrap.repeat);
      ac.bootstrap.filler_budget = b.value("filler_budget", ac.bootstrap.filler_budget);
      ac.bootstrap.jump_factor = b.value("jump_factor", ac.bootstrap.jump_factor);
      ac.bootstrap.jump_confirm = b.value("jump_confirm", ac.bootstrap.jump_confirm);
    }
    if (a.contains("idle")) {
      const auto& b = a.at("idle");
      reject_unknown(b, {"initial_ms", "resolution_ms", "ceiling_s"}, "attacker.idle");
      ac.idle.initial = ms_field(b, "initial_ms", ac.idle.initial);
      ac.idle.resolution = ms_field(b, "resolution_ms", ac.idle.resolution);
      ac.idle.ceiling = s_field(b, "ceiling_s", ac.idle.ceiling);
    }
    if (a.contains("hard")) {
      const auto& b = a.at("hard");
      reject_unknown(b, {"probe_gap_ms", "ceiling_s"}, "attacker.hard");
      ac.hard.probe_gap = ms_field(b, "probe_gap_ms", ac.hard.probe_gap);
      ac.hard.ceiling = s_field(b, "ceiling_s", ac.hard.ceiling);
    }
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    reject_unknown(b,
                   {"capacity_mean_rel_error", "usage_mean_rel_error", "capacity_run_rel_error",
                    "usage_run_rel_error", "capacity_mean_range", "require_all_runs_ok"},
                   "bounds");
    auto opt = [&b](const char* k) -> std::optional<double> {
      if (!b.contains(k)) return std::nullopt;
      return b.at(k).get<double>();
    };
    s.bounds.capacity_mean_rel_error = opt("capacity_mean_rel_error");
    s.bounds.usage_mean_rel_error = opt("usage_mean_rel_error");
    s.bounds.capacity_run_rel_error = opt("capacity_run_rel_error");
    s.bounds.usage_run_rel_error = opt("usage_run_rel_error");
    if (b.contains("capacity_mean_range")) {
      const auto& r = b.at("capacity_mean_range");
      s.bounds.capacity_mean_range = std::pair{r.at(0).get<double>(), r.at(1).get<double>()};
    }
    s.bounds.require_all_runs_ok = b.value("require_all_runs_ok", s.bounds.require_all_runs_ok);
  }
  s.validate();
  return s;
}

Json scenario_to_json(const Scenario& s) {
  const auto& l = s.sw.latency;
  Json j = {
      {"name", s.name},
      {"policy", std::string(to_string(s.sw.policy))},
      {"capacity", s.sw.capacity},
      {"initial_usage", s.sw.background.initial_usage},
      {"background_rate", s.sw.background.arrival_rate},
      {"timeouts", {{"hard_ms", to_ms(s.sw.timeouts.hard)}, {"idle_ms", to_ms(s.sw.timeouts.idle)}}},
      {"latency",
       {{"hit_ms", {l.hit.min_ms, l.hit.max_ms}},
        {"miss_notfull_ms", {l.miss_notfull.min_ms, l.miss_notfull.max_ms}},
        {"miss_full_ms", {l.miss_full.min_ms, l.miss_full.max_ms}},
        {"noise", std::string(to_string(l.noise))}}},
      {"repeats", s.repeats},
      {"seed", s.seed},
  };
  return j;
}

std::vector<Scenario> load_scenarios(const Json& doc, const std::vector<std::string>& overrides,
                                     std::optional<std::uint64_t> seed) {
  std::vector<Json> raw;
  if (doc.contains("scenarios")) {
    reject_unknown(doc, {"defaults", "scenarios"}, "config document");
    const Json defaults = doc.value("defaults", Json::object());
    for (const auto& entry : doc.at("scenarios")) {
      Json merged = defaults;
      merged.merge_patch(entry);
      raw.push_back(std::move(merged));
    }
  } else {
    raw.push_back(doc);
  }

  std::vector<Scenario> out;
  for (auto& j : raw) {
    for (const auto& o : overrides) apply_override(j, o);
    if (seed) j["seed"] = *seed;
    if (!j.contains("sweep")) {
      out.push_back(scenario_from_json(j));
      continue;
    }
    const auto sweep = j.at("sweep");
    j.erase("sweep");
    const auto field = sweep.at("field").get<std::string>();
    const std::string base = j.value("name", std::string("scenario"));
    for (const auto& v : sweep.at("values")) {
      Json one = j;
      walk(one, field) = v;
      one["name"] = base + "/" + field + "=" + v.dump();
      out.push_back(scenario_from_json(one));
    }
  }
  return out;
}

std::vector<Scenario> load_scenarios_file(const std::string& path,
                                          const std::vector<std::string>& overrides,
                                          std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  // Comments allowed (// and /* */).
  const Json doc = Json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  return load_scenarios(doc, overrides, seed);
}

}  // namespace flowinfer
