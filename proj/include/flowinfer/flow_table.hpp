#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "flowinfer/types.hpp"

namespace flowinfer {

/// Installed rule. A timeout of zero means the entry never expires on that
/// criterion.
struct FlowEntry {
  FlowKey key;
  VirtualTime inserted_at{0};
  VirtualTime last_access{0};
  Micros hard_timeout{0};
  Micros idle_timeout{0};
  Owner owner = Owner::Background;

  bool expired_at(VirtualTime t) const {
    return (hard_timeout.count() > 0 && t - inserted_at >= hard_timeout) ||
           (idle_timeout.count() > 0 && t - last_access >= idle_timeout);
  }
};

enum class LookupResult : std::uint8_t { Hit, Miss };

struct InsertResult {
  std::optional<FlowKey> evicted;
  bool was_full = false;
};

struct Occupancy {
  std::size_t attacker = 0;
  std::size_t background = 0;
  std::size_t total() const { return attacker + background; }
  bool operator==(const Occupancy&) const = default;
};

/// Why an entry left the table.
enum class RemovalCause : std::uint8_t { Evicted, HardTimeout, IdleTimeout };

struct RemovalRecord {
  FlowKey key;
  Owner owner;
  VirtualTime at;
  RemovalCause cause;
};

/// Capacity-bounded exact-match flow table with FIFO or LRU replacement.
///
/// Expiry is evaluated lazily: every lookup/insert/occupancy call first
/// purges entries whose hard or idle deadline is at or before `now`. The
/// caller must present a nondecreasing clock.
///
/// Victim order: FIFO by (inserted_at, seq); LRU by (last_access,
/// inserted_at, seq), where seq is a per-table insertion counter.
class FlowTable {
 public:
  FlowTable(std::size_t capacity, Policy policy);

  std::size_t capacity() const { return capacity_; }
  Policy policy() const { return policy_; }

  LookupResult lookup(const FlowKey& key, VirtualTime now);

  /// Installs `entry` with inserted_at = last_access = now. Throws
  /// ContractViolation if a live entry with the same key exists.
  InsertResult insert(FlowEntry entry, VirtualTime now);

  Occupancy occupancy(VirtualTime now);

  /// Number of live entries after purging at `now`.
  std::size_t size(VirtualTime now);
  bool full(VirtualTime now) { return size(now) >= capacity_; }

  /// Removes every entry expired at `now`; returns how many were removed.
  std::size_t purge(VirtualTime now);

  bool contains(const FlowKey& key) const { return index_.contains(key); }
  const FlowEntry* find(const FlowKey& key) const;

  /// Live entries in victim order (next victim first). Does not purge.
  std::vector<FlowEntry> entries_in_victim_order() const;

  /// Every removal since construction, in order.
  const std::vector<RemovalRecord>& removals() const { return removals_; }
  void set_record_removals(bool on) { record_removals_ = on; }

 private:
  struct Slot {
    FlowEntry entry;
    std::uint64_t seq;
  };
  // (primary time, inserted_at, seq); primary is inserted_at under FIFO and
  // last_access under LRU.
  using VictimKey = std::tuple<std::int64_t, std::int64_t, std::uint64_t>;
  using ExpiryKey = std::pair<std::int64_t, std::uint64_t>;

  VictimKey victim_key(const Slot& s) const;
  static std::optional<std::int64_t> deadline(const FlowEntry& e);
  void index_slot(const Slot& s);
  void unindex_slot(const Slot& s);
  void remove(std::uint64_t seq, VirtualTime at, RemovalCause cause);
  void check_clock(VirtualTime now);

  std::size_t capacity_;
  Policy policy_;
  std::uint64_t next_seq_ = 0;
  VirtualTime last_now_{0};
  std::unordered_map<std::uint64_t, Slot> slots_;
  std::unordered_map<FlowKey, std::uint64_t> index_;
  std::set<VictimKey> victims_;
  std::set<ExpiryKey> expiry_;
  Occupancy counts_;
  bool record_removals_ = true;
  std::vector<RemovalRecord> removals_;
};

}  // namespace flowinfer
