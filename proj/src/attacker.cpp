#include "flowinfer/attacker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace flowinfer {

std::string_view to_string(AttackErrc e) {
  switch (e) {
    case AttackErrc::JumpNeverObserved: return "JumpNeverObserved";
    case AttackErrc::TimeoutDisabled: return "TimeoutDisabled";
    case AttackErrc::BudgetExhausted: return "BudgetExhausted";
    case AttackErrc::InfeasibleRate: return "InfeasibleRate";
  }
  return "?";
}

AttackError::AttackError(AttackErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::string_view to_string(FlowState s) {
  switch (s) {
    case FlowState::Exist: return "Exist";
    case FlowState::NotExistNotFull: return "NotExist-NotFull";
    case FlowState::NotExistFull: return "NotExist-Full";
  }
  return "?";
}

RttThresholds RttThresholds::from_centers(double t1_ms, double t2_ms, double t3_ms) {
  RttThresholds t{t1_ms, t2_ms, t3_ms, std::sqrt(t1_ms * t2_ms), std::sqrt(t2_ms * t3_ms)};
  if (!t.valid()) {
    throw std::invalid_argument("RTT band centers must satisfy 0 < t1 < t2 < t3");
  }
  return t;
}

bool RttThresholds::valid() const {
  return t1_ms > 0 && t1_ms < hit_cut_ms && hit_cut_ms < t2_ms && t2_ms < full_cut_ms &&
         full_cut_ms < t3_ms;
}

FlowState RttThresholds::classify(Micros rtt) const {
  const double ms = to_ms(rtt);
  if (ms < hit_cut_ms) return FlowState::Exist;
  if (ms < full_cut_ms) return FlowState::NotExistNotFull;
  return FlowState::NotExistFull;
}

FlowKey KeySource::next() {
  // 10.0.0.0/8 sources, 192.168.0.0/16 destinations.
  const std::uint32_t i = next_++;
  return FlowKey{Ipv4{0x0A000000u | (i & 0x00FFFFFFu)}, Ipv4{0xC0A80000u | (i >> 24)},
                 Mac{0x020A00000000ULL | i}, Mac{0x02C000000000ULL | i}};
}

ProbeSession::ProbeSession(ProbeTarget& target, double max_rate_pps, VirtualTime start)
    : target_(target), max_rate_(max_rate_pps), clock_(start), last_send_(start) {
  if (!(max_rate_pps > 0)) throw std::invalid_argument("send rate must be positive");
  min_gap_ = Micros{std::max<std::int64_t>(1, std::llround(1e6 / max_rate_pps))};
}

Micros ProbeSession::send(const FlowKey& key) {
  const auto at = clock_;
  const auto rtt = send_at(key, at);
  clock_ = at + std::max(rtt, min_gap_);
  return rtt;
}

Micros ProbeSession::send_at(const FlowKey& key, VirtualTime at) {
  if (at < last_send_) throw ContractViolation("probe scheduled before the previous send");
  last_send_ = at;
  clock_ = std::max(clock_, at);
  ++probes_sent_;
  return target_.probe(key, at);
}

void ProbeSession::wait_until(VirtualTime t) { clock_ = std::max(clock_, t); }

// ---------------------------------------------------------------------------

namespace {

// Median of a sorted buffer; the buffer is kept sorted by insertion.
double median_ms(const std::vector<Micros>& sorted) {
  const auto n = sorted.size();
  if (n % 2 == 1) return to_ms(sorted[n / 2]);
  return 0.5 * (to_ms(sorted[n / 2 - 1]) + to_ms(sorted[n / 2]));
}

void insert_sorted(std::vector<Micros>& v, Micros x) {
  v.insert(std::upper_bound(v.begin(), v.end(), x), x);
}

}  // namespace

BootstrapSample bootstrap_once(ProbeSession& session, const BootstrapParams& params) {
  BootstrapSample out;
  const auto t0 = session.now();
  const auto pkt1 = session.fresh_key();
  out.t2 = session.send_at(pkt1, t0);
  out.t1 = session.send_at(pkt1, t0 + params.ts1);

  // Filler stream: distinct keys every ts2 until the RTT jumps. A jump only
  // counts once the next jump_confirm fresh keys also land above the cut.
  std::vector<Micros> miss_band{out.t2};
  const auto first_filler = t0 + params.ts1 + params.ts2;
  std::size_t sent = 0;
  const auto send_filler = [&] {
    const auto at = first_filler + params.ts2 * static_cast<std::int64_t>(sent++);
    return std::pair{at, session.send_at(session.fresh_key(), at)};
  };
  while (sent < params.filler_budget) {
    const auto [at, rtt] = send_filler();
    const double cut = params.jump_factor * median_ms(miss_band);
    if (to_ms(rtt) <= cut) {
      insert_sorted(miss_band, rtt);
      continue;
    }
    const auto candidate = sent;
    std::vector<Micros> confirm;
    auto last_at = at;
    while (confirm.size() < params.jump_confirm && sent < params.filler_budget) {
      const auto [cat, crtt] = send_filler();
      last_at = cat;
      confirm.push_back(crtt);
      if (to_ms(crtt) <= cut) break;
    }
    const bool confirmed = std::all_of(confirm.begin(), confirm.end(),
                                       [cut](Micros m) { return to_ms(m) > cut; }) &&
                           confirm.size() == params.jump_confirm;
    if (confirmed) {
      out.fillers = candidate;
      out.ts3 = params.ts2 * static_cast<std::int64_t>(candidate - 1);
      out.t3 = confirm.empty() ? rtt : confirm.front();
      session.wait_until(last_at + (confirm.empty() ? rtt : confirm.back()));
      return out;
    }
    insert_sorted(miss_band, rtt);
    for (const auto m : confirm) insert_sorted(miss_band, m);
  }
  throw AttackError(AttackErrc::JumpNeverObserved,
                    "no RTT jump within " + std::to_string(params.filler_budget) + " filler probes");
}

BootstrapResult bootstrap_thresholds(const SessionFactory& factory, const BootstrapParams& params,
                                     double max_rate_pps) {
  if (params.repeat == 0) throw std::invalid_argument("bootstrap repeat must be >= 1");
  BootstrapResult result;
  double s1 = 0, s2 = 0, s3 = 0;
  for (unsigned r = 0; r < params.repeat; ++r) {
    auto target = factory(r);
    ProbeSession session(*target, max_rate_pps);
    const auto sample = bootstrap_once(session, params);
    s1 += to_ms(sample.t1);
    s2 += to_ms(sample.t2);
    s3 += to_ms(sample.t3);
    if (params.known_min_timeout &&
        (params.ts1 > *params.known_min_timeout || sample.ts3 > *params.known_min_timeout)) {
      result.within_timeouts = false;
    }
    result.samples.push_back(sample);
  }
  const double n = params.repeat;
  result.thresholds = RttThresholds::from_centers(s1 / n, s2 / n, s3 / n);
  return result;
}

// ---------------------------------------------------------------------------

Micros measure_idle_timeout(ProbeSession& session, const RttThresholds& thresholds,
                            const IdleTimeoutParams& params) {
  if (params.initial.count() <= 0 || params.resolution.count() <= 0) {
    throw std::invalid_argument("idle timeout probe intervals must be positive");
  }
  const auto disabled = [&] {
    return AttackError(AttackErrc::TimeoutDisabled,
                       "entry survived idle gaps up to " +
                           std::to_string(to_seconds(params.ceiling)) + " s");
  };
  // Install a fresh key, stay silent for `gap`, probe it again.
  const auto survives = [&](Micros gap) {
    const auto key = session.fresh_key();
    const auto start = session.now();
    session.send_at(key, start);
    return thresholds.classify(session.send_at(key, start + gap)) == FlowState::Exist;
  };

  // Doubling train on a single key; each hit refreshes the entry.
  const auto key = session.fresh_key();
  auto last = session.now();
  session.send_at(key, last);
  Micros lo{0};
  Micros hi{0};
  for (auto gap = params.initial;; gap *= 2) {
    if (gap > params.ceiling) throw disabled();
    last += gap;
    if (thresholds.classify(session.send_at(key, last)) != FlowState::Exist) {
      hi = gap;
      break;
    }
    lo = gap;
  }

  bool hi_confirmed = false;
  for (;;) {
    while (hi - lo > params.resolution) {
      const auto mid = lo + (hi - lo) / 2;
      if (survives(mid)) {
        lo = mid;
      } else {
        hi = mid;
        hi_confirmed = true;
      }
    }
    if (hi_confirmed || !survives(hi)) break;
    // The train's miss came from the entry's total age (hard timeout), not
    // from the gap; keep doubling with fresh keys.
    lo = hi;
    for (auto gap = hi * 2;; gap *= 2) {
      if (gap > params.ceiling) throw disabled();
      if (!survives(gap)) {
        hi = gap;
        hi_confirmed = true;
        break;
      }
      lo = gap;
    }
  }
  const auto idle = lo + (hi - lo) / 2;

  // A key refreshed every idle/2 only dies of age. If it still dies before
  // outliving the measured gap, that gap was the hard timeout.
  const auto key2 = session.fresh_key();
  const auto born = session.now();
  const auto step = std::max(idle / 2, Micros{1});
  const auto horizon = born + idle + 2 * params.resolution;
  session.send_at(key2, born);
  for (auto t = born + step;; t += step) {
    if (t > horizon) t = horizon;
    if (thresholds.classify(session.send_at(key2, t)) != FlowState::Exist) {
      throw AttackError(AttackErrc::TimeoutDisabled,
                        "refreshed entry also expired; no idle timeout below the hard timeout");
    }
    if (t == horizon) break;
  }
  return idle;
}

Micros measure_hard_timeout(ProbeSession& session, const RttThresholds& thresholds,
                            const HardTimeoutParams& params) {
  if (params.probe_gap.count() <= 0) throw std::invalid_argument("probe gap must be positive");
  if (params.known_idle && params.known_idle->count() > 0 &&
      params.probe_gap * 10 > *params.known_idle) {
    throw std::invalid_argument("hard timeout probe gap must be at most a tenth of idle_timeout");
  }
  const auto key = session.fresh_key();
  const auto installed = session.now();
  session.send_at(key, installed);
  for (auto at = installed + params.probe_gap;; at += params.probe_gap) {
    if (at - installed > params.ceiling) {
      throw AttackError(AttackErrc::TimeoutDisabled,
                        "entry survived " + std::to_string(to_seconds(params.ceiling)) + " s of refreshes");
    }
    if (thresholds.classify(session.send_at(key, at)) != FlowState::Exist) return at - installed;
  }
}

// ---------------------------------------------------------------------------

FeasibilityVerdict check_feasibility(std::size_t capacity_guess, Micros hard_timeout,
                                     Micros idle_timeout, double v_gen, double v_del) {
  FeasibilityVerdict v;
  v.v_gen_available = v_gen;
  std::optional<Micros> shortest;
  for (auto t : {hard_timeout, idle_timeout}) {
    if (t.count() > 0) shortest = shortest ? std::min(*shortest, t) : t;
  }
  if (!shortest) {
    v.v_gen_required = 0.0;
    v.feasible = true;
    return v;
  }
  v.v_gen_required = v_del + static_cast<double>(capacity_guess) / to_seconds(*shortest);
  v.feasible = v_gen >= v.v_gen_required;
  return v;
}

// ---------------------------------------------------------------------------

namespace {

// Tracks the first run of `debounce` consecutive NotExist-Full replies to
// new-key probes.
class FullDetector {
 public:
  explicit FullDetector(unsigned debounce) : debounce_(std::max(1u, debounce)) {}

  /// `installed` counts attacker keys sent including the one just classified.
  void observe(FlowState s, std::size_t installed) {
    if (seen_) return;
    if (s != FlowState::NotExistFull) {
      run_ = 0;
      return;
    }
    if (++run_ >= debounce_) set(installed - run_);
  }
  void force(std::size_t n1) {
    if (!seen_) set(n1);
  }
  std::optional<std::size_t> n1() const { return seen_ ? std::optional{n1_} : std::nullopt; }

 private:
  void set(std::size_t n1) {
    n1_ = n1;
    seen_ = true;
  }

  unsigned debounce_;
  unsigned run_ = 0;
  bool seen_ = false;
  std::size_t n1_ = 0;
};

InferenceReport finish(Policy policy, std::size_t n1, std::size_t n2, const ProbeSession& session,
                       std::uint64_t probes_at_start, VirtualTime started,
                       const InferenceParams& params) {
  InferenceReport r;
  r.policy_assumed = policy;
  r.n1 = n1;
  r.n2 = n2;
  r.f_capacity = n2;
  r.f_other = n2 - n1;
  r.probes_sent = session.probes_sent() - probes_at_start;
  r.elapsed = session.now() - started;
  r.exceeded_timeout_window = params.min_timeout && r.elapsed > *params.min_timeout;
  return r;
}

}  // namespace

InferenceReport infer_fifo(ProbeSession& session, const RttThresholds& thresholds,
                           const InferenceParams& params) {
  const auto started = session.now();
  const auto probes_at_start = session.probes_sent();
  std::vector<FlowKey> keys;
  FullDetector full(params.full_debounce);
  std::uint64_t detection = 0;

  while (keys.size() < params.key_budget) {
    keys.push_back(session.fresh_key());
    full.observe(thresholds.classify(session.send(keys.back())), keys.size());
    if (!full.n1()) continue;
    // Under FIFO the earliest attacker key is the first attacker victim.
    ++detection;
    if (thresholds.classify(session.send(keys.front())) != FlowState::Exist) {
      auto r = finish(Policy::FIFO, *full.n1(), keys.size() - 1, session, probes_at_start, started,
                      params);
      r.detection_probes = detection;
      return r;
    }
  }
  throw AttackError(AttackErrc::BudgetExhausted,
                    std::to_string(params.key_budget) + " keys sent without detecting an eviction");
}

std::optional<std::size_t> rolling_round(ProbeSession& session, const RttThresholds& thresholds,
                                         std::span<const FlowKey> keys, std::uint64_t* probes) {
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (probes) ++*probes;
    if (thresholds.classify(session.send(keys[j])) != FlowState::Exist) return j;
  }
  return std::nullopt;
}

InferenceReport infer_lru(ProbeSession& session, const RttThresholds& thresholds,
                          const InferenceParams& params) {
  const auto started = session.now();
  const auto probes_at_start = session.probes_sent();
  std::vector<FlowKey> keys;
  FullDetector full(params.full_debounce);
  std::uint64_t rolling = 0;

  while (keys.size() < params.key_budget) {
    if (params.min_timeout && params.min_timeout->count() > 0) {
      const double round_s = static_cast<double>(keys.size() + 1) / session.max_rate();
      if (round_s >= to_seconds(*params.min_timeout)) {
        throw AttackError(AttackErrc::InfeasibleRate,
                          "rolling round of " + std::to_string(keys.size() + 1) +
                              " probes cannot complete within the minimum timeout");
      }
    }
    if (rolling_round(session, thresholds, keys, &rolling)) {
      // An attacker entry was evicted, so the table is full.
      const std::size_t n2 = keys.size() - 1;
      full.force(n2);
      auto r = finish(Policy::LRU, *full.n1(), n2, session, probes_at_start, started, params);
      r.rolling_probes = rolling;
      r.detection_probes = 1;
      return r;
    }
    keys.push_back(session.fresh_key());
    full.observe(thresholds.classify(session.send(keys.back())), keys.size());
  }
  throw AttackError(AttackErrc::BudgetExhausted,
                    std::to_string(params.key_budget) + " keys sent without detecting an eviction");
}

}  // namespace flowinfer
