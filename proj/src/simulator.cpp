#include "flowinfer/simulator.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace flowinfer {

namespace {
constexpr std::uint32_t kBackgroundSrcNet = 0xAC100000;  // 172.16.0.0/16
constexpr std::uint32_t kBackgroundDstNet = 0xAC110000;  // 172.17.0.0/16
}  // namespace

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Probe: return "probe";
    case EventKind::BackgroundArrival: return "background_arrival";
    case EventKind::Report: return "report";
  }
  return "?";
}

bool is_background_key(const FlowKey& key) {
  return (key.src_ip.value & 0xFFFF0000u) == kBackgroundSrcNet;
}

FlowKey background_key(std::uint32_t index) {
  return FlowKey{Ipv4{kBackgroundSrcNet | (index & 0xFFFFu)},
                 Ipv4{kBackgroundDstNet | (index >> 16)},
                 Mac{0x02AC00000000ULL | index}, Mac{0x02AD00000000ULL | index}};
}

Simulator::Simulator(const SwitchConfig& config)
    : config_(config),
      table_(config.capacity, config.policy),
      latency_(config.latency),
      arrival_rng_(mix_seed(config.background.seed, 0xa881)) {
  if (config.background.initial_usage > config.capacity) {
    throw std::invalid_argument("initial usage exceeds flow table capacity");
  }
  if (!(config.background.arrival_rate >= 0.0) || !std::isfinite(config.background.arrival_rate)) {
    throw std::invalid_argument("background arrival rate must be finite and non-negative");
  }
  for (std::size_t i = 0; i < config.background.initial_usage; ++i) {
    table_.insert(FlowEntry{background_key(next_background_index_++), {}, {},
                            config.timeouts.hard, config.timeouts.idle, Owner::Background},
                  VirtualTime{0});
  }
  arrivals_enabled_ = config.background.arrival_rate > 0.0;
  if (arrivals_enabled_) schedule_next_arrival();
}

void Simulator::schedule_next_arrival() {
  // Exponential inter-arrival gap by inversion.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double gap_s = -std::log1p(-u(arrival_rng_)) / config_.background.arrival_rate;
  next_arrival_ += Micros{static_cast<std::int64_t>(std::llround(gap_s * 1e6))};
}

SimEvent Simulator::process(const FlowKey& key, Owner owner, VirtualTime at, EventKind kind) {
  SimEvent ev{at, kind, key, owner, Branch::Hit, Micros{0}};
  if (table_.lookup(key, at) == LookupResult::Miss) {
    const auto r = table_.insert(
        FlowEntry{key, {}, {}, config_.timeouts.hard, config_.timeouts.idle, owner}, at);
    ev.branch = r.was_full ? Branch::MissFull : Branch::MissNotFull;
  }
  ev.rtt = latency_.draw(ev.branch);
  ++events_processed_;
  if (trace_enabled_) trace_.push_back(ev);
  return ev;
}

void Simulator::advance_clock(VirtualTime t) {
  if (t < now_) {
    throw ContractViolation("simulator time went backwards: " + std::to_string(t.count()) +
                            "us < " + std::to_string(now_.count()) + "us");
  }
  now_ = t;
}

std::vector<SimEvent> Simulator::run_until(VirtualTime t) {
  advance_clock(t);
  std::vector<SimEvent> out;
  while (arrivals_enabled_ && next_arrival_ <= t) {
    out.push_back(process(background_key(next_background_index_++), Owner::Background,
                          next_arrival_, EventKind::BackgroundArrival));
    ++background_arrivals_;
    schedule_next_arrival();
  }
  return out;
}

RttSample Simulator::send_probe(const FlowKey& key, VirtualTime at) {
  run_until(at);
  const auto owner = is_background_key(key) ? Owner::Background : Owner::Attacker;
  const auto ev = process(key, owner, at, EventKind::Probe);
  return RttSample{at, ev.rtt, ev.branch};
}

void Simulator::mark(VirtualTime at) {
  run_until(at);
  if (trace_enabled_) trace_.push_back(SimEvent{at, EventKind::Report, {}, Owner::Attacker});
}

GroundTruth Simulator::ground_truth() {
  return GroundTruth{config_.capacity, table_.occupancy(now_), config_.policy};
}

namespace {
class OwnedSimulatorProbe final : public ProbeTarget {
 public:
  explicit OwnedSimulatorProbe(const SwitchConfig& config) : sim_(config) {}
  Micros probe(const FlowKey& key, VirtualTime at) override { return sim_.send_probe(key, at).rtt; }

 private:
  Simulator sim_;
};
}  // namespace

std::unique_ptr<ProbeTarget> make_probe_target(const SwitchConfig& config) {
  return std::make_unique<OwnedSimulatorProbe>(config);
}

void Simulator::write_trace_csv(std::ostream& out) const {
  out << "time_us,kind,owner,branch,rtt_us\n";
  for (const auto& ev : trace_) {
    out << ev.time.count() << ',' << to_string(ev.kind) << ',';
    if (ev.kind == EventKind::Report) {
      out << ",,\n";
      continue;
    }
    out << to_string(ev.owner) << ',' << to_string(ev.branch) << ',' << ev.rtt.count() << '\n';
  }
}

}  // namespace flowinfer
