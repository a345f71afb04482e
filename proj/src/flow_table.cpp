#include "flowinfer/flow_table.hpp"

#include <algorithm>
#include <string>

namespace flowinfer {

FlowTable::FlowTable(std::size_t capacity, Policy policy) : capacity_(capacity), policy_(policy) {
  if (capacity == 0) throw std::invalid_argument("flow table capacity must be positive");
}

FlowTable::VictimKey FlowTable::victim_key(const Slot& s) const {
  const auto primary = policy_ == Policy::FIFO ? s.entry.inserted_at : s.entry.last_access;
  return {primary.count(), s.entry.inserted_at.count(), s.seq};
}

std::optional<std::int64_t> FlowTable::deadline(const FlowEntry& e) {
  std::optional<std::int64_t> d;
  if (e.hard_timeout.count() > 0) d = (e.inserted_at + e.hard_timeout).count();
  if (e.idle_timeout.count() > 0) {
    const auto idle = (e.last_access + e.idle_timeout).count();
    d = d ? std::min(*d, idle) : idle;
  }
  return d;
}

void FlowTable::index_slot(const Slot& s) {
  victims_.insert(victim_key(s));
  if (auto d = deadline(s.entry)) expiry_.emplace(*d, s.seq);
}

void FlowTable::unindex_slot(const Slot& s) {
  victims_.erase(victim_key(s));
  if (auto d = deadline(s.entry)) expiry_.erase({*d, s.seq});
}

void FlowTable::check_clock(VirtualTime now) {
  if (now < last_now_) {
    throw ContractViolation("flow table clock went backwards: " + std::to_string(now.count()) +
                            "us < " + std::to_string(last_now_.count()) + "us");
  }
  last_now_ = now;
}

void FlowTable::remove(std::uint64_t seq, VirtualTime at, RemovalCause cause) {
  auto it = slots_.find(seq);
  const Slot& s = it->second;
  unindex_slot(s);
  index_.erase(s.entry.key);
  (s.entry.owner == Owner::Attacker ? counts_.attacker : counts_.background)--;
  if (record_removals_) removals_.push_back({s.entry.key, s.entry.owner, at, cause});
  slots_.erase(it);
}

std::size_t FlowTable::purge(VirtualTime now) {
  check_clock(now);
  std::size_t removed = 0;
  while (!expiry_.empty() && expiry_.begin()->first <= now.count()) {
    const auto seq = expiry_.begin()->second;
    const auto& e = slots_.at(seq).entry;
    const bool hard =
        e.hard_timeout.count() > 0 && now - e.inserted_at >= e.hard_timeout;
    remove(seq, now, hard ? RemovalCause::HardTimeout : RemovalCause::IdleTimeout);
    ++removed;
  }
  return removed;
}

LookupResult FlowTable::lookup(const FlowKey& key, VirtualTime now) {
  purge(now);
  auto it = index_.find(key);
  if (it == index_.end()) return LookupResult::Miss;
  Slot& s = slots_.at(it->second);
  unindex_slot(s);
  s.entry.last_access = now;
  index_slot(s);
  return LookupResult::Hit;
}

InsertResult FlowTable::insert(FlowEntry entry, VirtualTime now) {
  purge(now);
  if (index_.contains(entry.key)) {
    throw ContractViolation("duplicate flow key inserted: " + to_string(entry.key));
  }
  InsertResult result;
  result.was_full = slots_.size() >= capacity_;
  if (result.was_full) {
    const auto victim_seq = std::get<2>(*victims_.begin());
    result.evicted = slots_.at(victim_seq).entry.key;
    remove(victim_seq, now, RemovalCause::Evicted);
  }
  entry.inserted_at = now;
  entry.last_access = now;
  const auto seq = next_seq_++;
  (entry.owner == Owner::Attacker ? counts_.attacker : counts_.background)++;
  index_.emplace(entry.key, seq);
  auto [it, _] = slots_.emplace(seq, Slot{std::move(entry), seq});
  index_slot(it->second);
  return result;
}

Occupancy FlowTable::occupancy(VirtualTime now) {
  purge(now);
  return counts_;
}

std::size_t FlowTable::size(VirtualTime now) {
  purge(now);
  return slots_.size();
}

const FlowEntry* FlowTable::find(const FlowKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &slots_.at(it->second).entry;
}

std::vector<FlowEntry> FlowTable::entries_in_victim_order() const {
  std::vector<FlowEntry> out;
  out.reserve(victims_.size());
  for (const auto& v : victims_) out.push_back(slots_.at(std::get<2>(v)).entry);
  return out;
}

}  // namespace flowinfer
