#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <vector>

#include "flowinfer/flow_table.hpp"
#include "flowinfer/latency_model.hpp"
#include "flowinfer/probe_target.hpp"
#include "flowinfer/types.hpp"

namespace flowinfer {

struct Timeouts {
  Micros hard{0};  // 0 = permanent
  Micros idle{0};  // 0 = permanent
  bool operator==(const Timeouts&) const = default;
};

/// Traffic from other tenants sharing the switch.
struct BackgroundWorkload {
  double arrival_rate = 0.0;      // new flows per second (Poisson)
  std::size_t initial_usage = 0;  // entries installed at t = 0
  std::uint64_t seed = 1;
};

struct SwitchConfig {
  std::size_t capacity = 1000;
  Policy policy = Policy::FIFO;
  Timeouts timeouts;
  LatencyModel latency;
  BackgroundWorkload background;
};

enum class EventKind : std::uint8_t { Probe, BackgroundArrival, Report };

std::string_view to_string(EventKind k);

struct SimEvent {
  VirtualTime time{0};
  EventKind kind = EventKind::Probe;
  FlowKey key;
  Owner owner = Owner::Attacker;
  Branch branch = Branch::Hit;
  Micros rtt{0};
  bool operator==(const SimEvent&) const = default;
};

struct RttSample {
  VirtualTime sent_at{0};
  Micros rtt{0};
  Branch branch = Branch::Hit;  // test-only; the attacker never sees it
};

struct GroundTruth {
  std::size_t capacity = 0;
  Occupancy occupancy;
  Policy policy = Policy::FIFO;
};

/// Background tenants draw keys from 172.16.0.0/16 source addresses; nothing
/// else may use that range.
bool is_background_key(const FlowKey& key);
FlowKey background_key(std::uint32_t index);

/// Single-switch, single-controller emulation on a virtual clock.
///
/// Each packet is matched against the flow table at its send time. A hit
/// costs a hit-band RTT. A miss has the controller install an entry (evicting
/// per policy when the table is full) and costs a miss-notfull or miss-full
/// RTT. Background arrivals follow the same path with fresh background keys.
class Simulator {
 public:
  explicit Simulator(const SwitchConfig& config);

  /// Processes every background arrival at or before `at`, then the probe.
  /// The key's owner is derived from its address range.
  RttSample send_probe(const FlowKey& key, VirtualTime at);

  /// Applies background arrivals with time <= t and advances the clock to t.
  std::vector<SimEvent> run_until(VirtualTime t);

  /// Appends a report marker to the trace.
  void mark(VirtualTime at);

  GroundTruth ground_truth();
  VirtualTime now() const { return now_; }
  const SwitchConfig& config() const { return config_; }
  const FlowTable& table() const { return table_; }

  std::uint64_t events_processed() const { return events_processed_; }
  std::uint64_t background_arrivals() const { return background_arrivals_; }

  void set_trace_enabled(bool on) { trace_enabled_ = on; }
  const std::vector<SimEvent>& trace() const { return trace_; }
  /// CSV columns: time_us,kind,owner,branch,rtt_us.
  void write_trace_csv(std::ostream& out) const;

 private:
  SimEvent process(const FlowKey& key, Owner owner, VirtualTime at, EventKind kind);
  void advance_clock(VirtualTime t);
  void schedule_next_arrival();

  SwitchConfig config_;
  FlowTable table_;
  LatencySampler latency_;
  std::mt19937_64 arrival_rng_;
  VirtualTime now_{0};
  VirtualTime next_arrival_{0};
  bool arrivals_enabled_ = false;
  std::uint32_t next_background_index_ = 0;
  std::uint64_t events_processed_ = 0;
  std::uint64_t background_arrivals_ = 0;
  bool trace_enabled_ = false;
  std::vector<SimEvent> trace_;
};

/// Attacker-facing adapter: exposes RTTs only.
class SimulatorProbe final : public ProbeTarget {
 public:
  explicit SimulatorProbe(Simulator& sim) : sim_(sim) {}
  Micros probe(const FlowKey& key, VirtualTime at) override { return sim_.send_probe(key, at).rtt; }

 private:
  Simulator& sim_;
};

/// A probe target that owns its simulator.
std::unique_ptr<ProbeTarget> make_probe_target(const SwitchConfig& config);

}  // namespace flowinfer
