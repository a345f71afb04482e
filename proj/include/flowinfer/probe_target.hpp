#pragma once

#include "flowinfer/types.hpp"

namespace flowinfer {

/// The only view of the network an attacker gets: send a packet carrying
/// `key` at virtual time `at`, observe its round-trip time.
class ProbeTarget {
 public:
  virtual ~ProbeTarget() = default;
  virtual Micros probe(const FlowKey& key, VirtualTime at) = 0;
};

}  // namespace flowinfer
