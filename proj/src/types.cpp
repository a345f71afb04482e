#include "flowinfer/types.hpp"

#include <array>
#include <cstdio>

namespace flowinfer {

std::string to_string(Ipv4 ip) {
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%u.%u.%u.%u", (ip.value >> 24) & 0xFF,
                (ip.value >> 16) & 0xFF, (ip.value >> 8) & 0xFF, ip.value & 0xFF);
  return buf.data();
}

std::string to_string(Mac mac) {
  std::array<char, 18> buf{};
  const auto b = [&](int i) { return static_cast<unsigned>((mac.value >> (8 * (5 - i))) & 0xFF); };
  std::snprintf(buf.data(), buf.size(), "%02x:%02x:%02x:%02x:%02x:%02x", b(0), b(1), b(2), b(3),
                b(4), b(5));
  return buf.data();
}

std::string to_string(const FlowKey& key) {
  return to_string(key.src_ip) + "->" + to_string(key.dst_ip) + " [" + to_string(key.src_mac) +
         "->" + to_string(key.dst_mac) + "]";
}

std::string_view to_string(Owner owner) {
  return owner == Owner::Attacker ? "attacker" : "background";
}

std::string_view to_string(Policy policy) { return policy == Policy::FIFO ? "FIFO" : "LRU"; }

Policy parse_policy(std::string_view text) {
  if (text == "FIFO" || text == "fifo") return Policy::FIFO;
  if (text == "LRU" || text == "lru") return Policy::LRU;
  throw std::invalid_argument("unknown replacement policy: " + std::string(text));
}

}  // namespace flowinfer
