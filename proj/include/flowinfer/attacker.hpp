#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "flowinfer/probe_target.hpp"
#include "flowinfer/types.hpp"

namespace flowinfer {

enum class AttackErrc : std::uint8_t {
  JumpNeverObserved,
  TimeoutDisabled,
  BudgetExhausted,
  InfeasibleRate,
};

std::string_view to_string(AttackErrc e);

/// Domain failure of an attack step.
class AttackError : public std::runtime_error {
 public:
  AttackError(AttackErrc code, const std::string& what);
  AttackErrc code() const { return code_; }

 private:
  AttackErrc code_;
};

/// Flow-table state as inferred from a single RTT.
enum class FlowState : std::uint8_t { Exist, NotExistNotFull, NotExistFull };

std::string_view to_string(FlowState s);

/// Calibrated RTT band centers and the cut points between them.
struct RttThresholds {
  double t1_ms = 0;  // hit
  double t2_ms = 0;  // miss, table not full
  double t3_ms = 0;  // miss, table full
  double hit_cut_ms = 0;
  double full_cut_ms = 0;

  /// Cuts at the geometric means of adjacent centers.
  static RttThresholds from_centers(double t1_ms, double t2_ms, double t3_ms);

  FlowState classify(Micros rtt) const;
  bool valid() const;
};

/// Distinct attacker flow keys, all outside the background tenants' range.
class KeySource {
 public:
  explicit KeySource(std::uint32_t first_index = 0) : next_(first_index) {}
  FlowKey next();
  std::uint32_t issued() const { return next_; }

 private:
  std::uint32_t next_;
};

/// The attacker's connection to one switch: owns its clock, its fresh-key
/// supply and a send-rate ceiling. Single-threaded.
class ProbeSession {
 public:
  ProbeSession(ProbeTarget& target, double max_rate_pps, VirtualTime start = VirtualTime{0});

  /// Sends at the session clock and waits for the reply; the clock advances
  /// by max(rtt, 1 / max_rate).
  Micros send(const FlowKey& key);

  /// Sends at an explicit time without waiting for the reply. `at` must not
  /// precede the previous send.
  Micros send_at(const FlowKey& key, VirtualTime at);

  void wait(Micros d) { clock_ += d; }
  void wait_until(VirtualTime t);
  VirtualTime now() const { return clock_; }
  std::uint64_t probes_sent() const { return probes_sent_; }
  double max_rate() const { return max_rate_; }
  FlowKey fresh_key() { return keys_.next(); }

 private:
  ProbeTarget& target_;
  double max_rate_;
  Micros min_gap_;
  VirtualTime clock_;
  VirtualTime last_send_;
  std::uint64_t probes_sent_ = 0;
  KeySource keys_;
};

// ---------------------------------------------------------------------------
// RTT bootstrap

struct BootstrapParams {
  Micros ts1{10'000};  // Pkt_1 re-probe delay
  Micros ts2{1'000};   // filler inter-send gap
  unsigned repeat = 1;
  std::size_t filler_budget = 100'000;
  double jump_factor = 1.5;  // jump when rtt > factor * running median
  std::size_t jump_confirm = 3;  // further fresh keys that must agree
  std::optional<Micros> known_min_timeout;
};

struct BootstrapSample {
  Micros t1{0};
  Micros t2{0};
  Micros t3{0};
  std::size_t fillers = 0;
  Micros ts3{0};  // (fillers - 1) * ts2
};

struct BootstrapResult {
  RttThresholds thresholds;
  std::vector<BootstrapSample> samples;
  /// False when a repeat's ts1 or ts3 exceeded the known minimum timeout.
  bool within_timeouts = true;
};

/// One pass of the two-stream procedure against the session's switch.
/// Throws AttackError(JumpNeverObserved) if the filler budget runs out.
BootstrapSample bootstrap_once(ProbeSession& session, const BootstrapParams& params);

/// Supplies a freshly reset switch per repeat (a used one stays full).
using SessionFactory = std::function<std::unique_ptr<ProbeTarget>(unsigned repeat)>;

BootstrapResult bootstrap_thresholds(const SessionFactory& factory, const BootstrapParams& params,
                                     double max_rate_pps = 10'000.0);

// ---------------------------------------------------------------------------
// Timeout measurement

enum class IdleProbeStrategy : std::uint8_t { DoublingThenBisect };

struct IdleTimeoutParams {
  Micros initial{100'000};
  Micros resolution{10'000};
  Micros ceiling{120'000'000};
  IdleProbeStrategy strategy = IdleProbeStrategy::DoublingThenBisect;
};

/// Packet train on one key with doubling gaps until the entry disappears,
/// then bisection on the bracketing interval. Returns the final bracket
/// midpoint. Throws AttackError(TimeoutDisabled) past the ceiling.
Micros measure_idle_timeout(ProbeSession& session, const RttThresholds& thresholds,
                            const IdleTimeoutParams& params = {});

struct HardTimeoutParams {
  Micros probe_gap{100'000};
  Micros ceiling{120'000'000};
  std::optional<Micros> known_idle;  // probe_gap must be <= idle / 10
};

/// Keeps one key refreshed every probe_gap; returns the time from install to
/// the first NotExist observation.
Micros measure_hard_timeout(ProbeSession& session, const RttThresholds& thresholds,
                            const HardTimeoutParams& params = {});

// ---------------------------------------------------------------------------
// Feasibility

struct FeasibilityVerdict {
  double v_gen_required = 0;   // packets/s
  double v_gen_available = 0;  // packets/s
  bool feasible = true;
};

/// V_gen >= V_del + C / min(finite timeouts). A zero timeout is permanent;
/// with both permanent nothing is deleted and the attack is always feasible.
FeasibilityVerdict check_feasibility(std::size_t capacity_guess, Micros hard_timeout,
                                     Micros idle_timeout, double v_gen, double v_del = 0.0);

// ---------------------------------------------------------------------------
// Capacity / usage inference

struct InferenceParams {
  std::size_t key_budget = 100'000;
  unsigned full_debounce = 1;  // consecutive NotExist-Full probes required
  std::optional<Micros> min_timeout;
};

struct InferenceReport {
  std::size_t f_capacity = 0;
  std::size_t f_other = 0;
  std::size_t n1 = 0;  // attacker entries installed when the table was first seen full
  std::size_t n2 = 0;  // attacker entries live when the first eviction was seen
  std::uint64_t probes_sent = 0;
  Policy policy_assumed = Policy::FIFO;
  std::uint64_t detection_probes = 0;
  std::uint64_t rolling_probes = 0;
  Micros elapsed{0};
  bool exceeded_timeout_window = false;
};

/// Streams fresh keys; the first NotExist-Full reply fixes n1. From then on
/// the earliest attacker key is re-probed after every insertion, and its
/// first NotExist reply fixes n2.
InferenceReport infer_fifo(ProbeSession& session, const RttThresholds& thresholds,
                           const InferenceParams& params);

/// Before each new key, re-accesses every earlier attacker key in insertion
/// order so the attacker's entries stay most recently used. A re-access that
/// misses fixes n2. Throws InfeasibleRate once one rolling round no longer
/// fits inside the minimum timeout at the session's rate.
InferenceReport infer_lru(ProbeSession& session, const RttThresholds& thresholds,
                          const InferenceParams& params);

/// One rolling maintenance pass over `keys`. Returns the index of the first
/// key whose re-access classified as NotExist, stopping there.
std::optional<std::size_t> rolling_round(ProbeSession& session, const RttThresholds& thresholds,
                                         std::span<const FlowKey> keys,
                                         std::uint64_t* probes = nullptr);

}  // namespace flowinfer
