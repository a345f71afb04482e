#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "flowinfer/types.hpp"

namespace flowinfer {

/// The three packet-processing paths a probe can take through the switch.
enum class Branch : std::uint8_t { Hit, MissNotFull, MissFull };

std::string_view to_string(Branch b);

enum class Noise : std::uint8_t { None, Uniform, TruncatedGaussian };

std::string_view to_string(Noise n);
Noise parse_noise(std::string_view text);

struct LatencyRange {
  double min_ms = 0;
  double max_ms = 0;
  double mid_ms() const { return 0.5 * (min_ms + max_ms); }
  bool contains(double ms) const { return ms >= min_ms && ms <= max_ms; }
  bool operator==(const LatencyRange&) const = default;
};

/// Per-branch RTT bands. Defaults are the measured switch RTTs: 0.2-0.3 ms on
/// a hit, 3-5 ms on a miss with free space, 8-10 ms on a miss that forces an
/// eviction.
struct LatencyModel {
  LatencyRange hit{0.2, 0.3};
  LatencyRange miss_notfull{3.0, 5.0};
  LatencyRange miss_full{8.0, 10.0};
  Noise noise = Noise::Uniform;
  std::uint64_t seed = 1;

  const LatencyRange& range(Branch b) const;

  /// Throws std::invalid_argument unless hit < miss_notfull < miss_full and
  /// each range is well formed.
  void validate() const;
};

/// Draws RTTs for a branch. Every draw lies inside the branch's range.
class LatencySampler {
 public:
  explicit LatencySampler(const LatencyModel& model);

  Micros draw(Branch b);
  const LatencyModel& model() const { return model_; }

 private:
  LatencyModel model_;
  std::mt19937_64 rng_;
};

/// SplitMix64 step, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace flowinfer
