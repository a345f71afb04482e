#include <random>

#include "doctest.h"
#include "flowinfer/flow_table.hpp"
#include "oracles.hpp"

using namespace flowinfer;
using oracle::key;

namespace {

FlowEntry entry(const FlowKey& k, Owner o = Owner::Attacker, Micros hard = Micros{0},
                Micros idle = Micros{0}) {
  return FlowEntry{k, {}, {}, hard, idle, o};
}

VirtualTime ms(std::int64_t v) { return Micros{v * 1000}; }

}  // namespace

TEST_CASE("lookup: empty table misses") {
  FlowTable t(4, Policy::FIFO);
  CHECK(t.lookup(key(1), ms(0)) == LookupResult::Miss);
}

TEST_CASE("lookup: immediate re-lookup hits") {
  FlowTable t(4, Policy::FIFO);
  t.insert(entry(key(1)), ms(0));
  CHECK(t.lookup(key(1), ms(1)) == LookupResult::Hit);
}

TEST_CASE("lookup: idle timeout expires the entry") {
  // Hand replay: inserted at 0, idle 5000 ms, probed at 6000: 6000 - 0 >= 5000.
  const std::int64_t inserted = 0, idle = 5000, probe = 6000;
  const bool expected_expired = probe - inserted >= idle;
  REQUIRE(expected_expired);

  FlowTable t(4, Policy::LRU);
  t.insert(entry(key(1), Owner::Attacker, Micros{0}, ms(idle)), ms(inserted));
  CHECK(t.lookup(key(1), ms(probe)) == LookupResult::Miss);
}

TEST_CASE("expiry boundary is inclusive") {
  FlowTable t(4, Policy::FIFO);
  t.insert(entry(key(1), Owner::Attacker, ms(1000), Micros{0}), ms(0));
  CHECK(t.lookup(key(1), Micros{999'999}) == LookupResult::Hit);
  CHECK(t.lookup(key(1), ms(1000)) == LookupResult::Miss);
  CHECK(t.removals().back().cause == RemovalCause::HardTimeout);
}

TEST_CASE("insert: FIFO evicts the oldest insertion") {
  FlowTable t(3, Policy::FIFO);
  for (std::uint32_t i = 1; i <= 3; ++i) t.insert(entry(key(i)), ms(i));
  t.lookup(key(1), ms(4));  // no reorder under FIFO
  const auto r = t.insert(entry(key(4)), ms(5));
  CHECK(r.was_full);
  REQUIRE(r.evicted);
  CHECK(*r.evicted == key(1));
}

TEST_CASE("insert: LRU evicts the least recently used") {
  FlowTable t(3, Policy::LRU);
  for (std::uint32_t i = 1; i <= 3; ++i) t.insert(entry(key(i)), ms(i));
  t.lookup(key(1), ms(4));
  const auto r = t.insert(entry(key(4)), ms(5));
  CHECK(r.was_full);
  REQUIRE(r.evicted);
  CHECK(*r.evicted == key(2));
}

TEST_CASE("insert: under capacity evicts nothing") {
  FlowTable t(2, Policy::FIFO);
  const auto r = t.insert(entry(key(1)), ms(0));
  CHECK_FALSE(r.was_full);
  CHECK_FALSE(r.evicted);
  CHECK(t.contains(key(1)));
}

TEST_CASE("insert: duplicate key is a contract violation") {
  FlowTable t(2, Policy::LRU);
  t.insert(entry(key(1)), ms(0));
  CHECK_THROWS_AS(t.insert(entry(key(1)), ms(1)), ContractViolation);
}

TEST_CASE("clock must not go backwards") {
  FlowTable t(2, Policy::LRU);
  t.insert(entry(key(1)), ms(5));
  CHECK_THROWS_AS(t.lookup(key(1), ms(4)), ContractViolation);
}

TEST_CASE("zero capacity is rejected") { CHECK_THROWS_AS(FlowTable(0, Policy::FIFO), std::invalid_argument); }

TEST_CASE("LRU tie on last_access breaks by earlier insertion") {
  FlowTable t(2, Policy::LRU);
  t.insert(entry(key(1)), ms(0));
  t.insert(entry(key(2)), ms(5));
  t.lookup(key(1), ms(5));  // both last_access = 5; key(1) inserted earlier
  const auto r = t.insert(entry(key(3)), ms(5));
  REQUIRE(r.evicted);
  CHECK(*r.evicted == key(1));
}

TEST_CASE("occupancy") {
  SUBCASE("empty") {
    FlowTable t(10, Policy::FIFO);
    CHECK(t.occupancy(ms(0)) == Occupancy{0, 0});
  }
  SUBCASE("counts per owner") {
    FlowTable t(100, Policy::FIFO);
    for (std::uint32_t i = 0; i < 5; ++i) t.insert(entry(key(i), Owner::Attacker), ms(i));
    for (std::uint32_t i = 5; i < 8; ++i) t.insert(entry(key(i), Owner::Background), ms(i));
    CHECK(t.occupancy(ms(10)) == Occupancy{5, 3});
  }
  SUBCASE("hard timeouts drain background entries") {
    // Hand replay: all inserted by t = 4 ms with hard 1000 ms, so all are
    // gone at 2000 ms.
    FlowTable t(100, Policy::FIFO);
    for (std::uint32_t i = 0; i < 5; ++i) t.insert(entry(key(i), Owner::Background, ms(1000)), ms(i));
    CHECK(t.occupancy(ms(2000)) == Occupancy{0, 0});
  }
}

TEST_CASE("purge is idempotent at a fixed time") {
  FlowTable t(50, Policy::LRU);
  for (std::uint32_t i = 0; i < 40; ++i) {
    t.insert(entry(key(i), Owner::Background, ms(100 + i), ms(50 + 2 * i)), ms(i));
  }
  const auto removed = t.purge(ms(90));
  CHECK(removed > 0);
  const auto snapshot = t.entries_in_victim_order();
  CHECK(t.purge(ms(90)) == 0);
  CHECK(t.entries_in_victim_order().size() == snapshot.size());
}

TEST_CASE("entry refreshed faster than idle_timeout never expires") {
  FlowTable t(4, Policy::FIFO);
  const Micros idle = ms(1000);
  t.insert(entry(key(1), Owner::Attacker, Micros{0}, idle), ms(0));
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> gap(1, idle.count() - 1);
  VirtualTime now{0};
  for (int i = 0; i < 2000; ++i) {
    now += Micros{gap(rng)};
    REQUIRE(t.lookup(key(1), now) == LookupResult::Hit);
  }
}

TEST_CASE("property: occupancy never exceeds capacity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cap = 1 + rng() % 20;
    FlowTable t(cap, trial % 2 ? Policy::LRU : Policy::FIFO);
    VirtualTime now{0};
    for (int i = 0; i < 500; ++i) {
      now += Micros{static_cast<std::int64_t>(rng() % 3000)};
      const auto k = key(static_cast<std::uint32_t>(rng() % 60));
      if (t.lookup(k, now) == LookupResult::Miss) {
        t.insert(entry(k, rng() % 2 ? Owner::Attacker : Owner::Background, ms(rng() % 50),
                       ms(rng() % 20)),
                 now);
      }
      REQUIRE(t.occupancy(now).total() <= cap);
    }
  }
}

namespace {

// Random lookup-then-insert trace compared step by step against an oracle.
template <typename Oracle>
std::size_t divergences(Policy policy, std::uint64_t seed, std::size_t events, bool shared_timestamps) {
  std::mt19937_64 rng(seed);
  const std::size_t cap = 8 + rng() % 56;
  FlowTable t(cap, policy);
  Oracle o(cap);
  std::size_t bad = 0;
  VirtualTime now{0};
  for (std::size_t i = 0; i < events; ++i) {
    if (!shared_timestamps || rng() % 3 == 0) now += Micros{1 + static_cast<std::int64_t>(rng() % 100)};
    const auto k = key(static_cast<std::uint32_t>(rng() % (cap * 3)));
    const bool hit = t.lookup(k, now) == LookupResult::Hit;
    if (hit != o.lookup(k)) ++bad;
    if (!hit) {
      const auto r = t.insert(entry(k), now);
      if (r.evicted != o.insert(k)) ++bad;
    }
  }
  return bad;
}

}  // namespace

TEST_CASE("FIFO matches a reference queue on random traces") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(divergences<oracle::QueueOracle>(Policy::FIFO, seed, 10'000, false) == 0);
    CHECK(divergences<oracle::QueueOracle>(Policy::FIFO, seed, 10'000, true) == 0);
  }
}

TEST_CASE("LRU matches a reference recency list on random traces") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(divergences<oracle::RecencyListOracle>(Policy::LRU, seed, 10'000, false) == 0);
  }
}

TEST_CASE("flow table matches the brute-force model with timeouts and ties") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::mt19937_64 rng(seed);
    const auto policy = seed % 2 ? Policy::LRU : Policy::FIFO;
    const std::size_t cap = 4 + rng() % 30;
    FlowTable t(cap, policy);
    oracle::BruteTable b(cap, policy);
    std::int64_t now = 0;
    for (int i = 0; i < 10'000; ++i) {
      if (rng() % 2) now += static_cast<std::int64_t>(rng() % 400);
      const auto k = key(static_cast<std::uint32_t>(rng() % (cap * 3)));
      const bool hit = t.lookup(k, Micros{now}) == LookupResult::Hit;
      REQUIRE(hit == b.lookup(k, now));
      if (!hit) {
        const std::int64_t hard = rng() % 3 ? 0 : 1000 + static_cast<std::int64_t>(rng() % 20'000);
        const std::int64_t idle = rng() % 3 ? 0 : 500 + static_cast<std::int64_t>(rng() % 5'000);
        const auto owner = rng() % 2 ? Owner::Attacker : Owner::Background;
        const auto r = t.insert(entry(k, owner, Micros{hard}, Micros{idle}), Micros{now});
        const auto [full, ev] = b.insert(k, now, hard, idle, owner);
        REQUIRE(r.was_full == full);
        REQUIRE(r.evicted == ev);
      }
      const auto occ = t.occupancy(Micros{now});
      REQUIRE(occ.attacker == b.count(Owner::Attacker, now));
      REQUIRE(occ.background == b.count(Owner::Background, now));
    }
  }
}
