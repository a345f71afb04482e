#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowinfer {

// Virtual time since simulation start, microsecond resolution.
using Micros = std::chrono::microseconds;
using VirtualTime = Micros;

constexpr Micros from_ms(double ms) {
  return Micros{static_cast<std::int64_t>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5))};
}
constexpr double to_ms(Micros t) { return static_cast<double>(t.count()) / 1000.0; }
constexpr double to_seconds(Micros t) { return static_cast<double>(t.count()) / 1e6; }

struct Ipv4 {
  std::uint32_t value = 0;
  auto operator<=>(const Ipv4&) const = default;
};

// 48-bit MAC stored in the low bits.
struct Mac {
  std::uint64_t value = 0;
  auto operator<=>(const Mac&) const = default;
};

std::string to_string(Ipv4 ip);
std::string to_string(Mac mac);

/// Exact-match header tuple that distinguishes one probe flow from another.
struct FlowKey {
  Ipv4 src_ip;
  Ipv4 dst_ip;
  Mac src_mac;
  Mac dst_mac;
  auto operator<=>(const FlowKey&) const = default;
};

std::string to_string(const FlowKey& key);

enum class Owner : std::uint8_t { Attacker, Background };
enum class Policy : std::uint8_t { FIFO, LRU };

std::string_view to_string(Owner owner);
std::string_view to_string(Policy policy);
Policy parse_policy(std::string_view text);

/// Raised when a caller breaks a documented precondition (simulator bug, not
/// a domain outcome).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace flowinfer

template <>
struct std::hash<flowinfer::FlowKey> {
  std::size_t operator()(const flowinfer::FlowKey& k) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xbf58476d1ce4e5b9ULL;
      h ^= h >> 31;
    };
    mix((std::uint64_t{k.src_ip.value} << 32) | k.dst_ip.value);
    mix(k.src_mac.value);
    mix(k.dst_mac.value);
    return static_cast<std::size_t>(h);
  }
};
