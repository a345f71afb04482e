#include "flowinfer/latency_model.hpp"

#include <algorithm>
#include <string>

namespace flowinfer {

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::Hit: return "hit";
    case Branch::MissNotFull: return "miss_notfull";
    case Branch::MissFull: return "miss_full";
  }
  return "?";
}

std::string_view to_string(Noise n) {
  switch (n) {
    case Noise::None: return "none";
    case Noise::Uniform: return "uniform";
    case Noise::TruncatedGaussian: return "truncated-gaussian";
  }
  return "?";
}

Noise parse_noise(std::string_view text) {
  if (text == "none") return Noise::None;
  if (text == "uniform") return Noise::Uniform;
  if (text == "truncated-gaussian" || text == "gaussian") return Noise::TruncatedGaussian;
  throw std::invalid_argument("unknown noise model: " + std::string(text));
}

const LatencyRange& LatencyModel::range(Branch b) const {
  switch (b) {
    case Branch::Hit: return hit;
    case Branch::MissNotFull: return miss_notfull;
    case Branch::MissFull: return miss_full;
  }
  return hit;
}

void LatencyModel::validate() const {
  for (const auto* r : {&hit, &miss_notfull, &miss_full}) {
    if (!(r->min_ms > 0) || r->max_ms < r->min_ms) {
      throw std::invalid_argument("latency range must satisfy 0 < min <= max");
    }
  }
  if (!(hit.max_ms < miss_notfull.min_ms && miss_notfull.max_ms < miss_full.min_ms)) {
    throw std::invalid_argument("latency ranges must be disjoint and ordered hit < miss_notfull < miss_full");
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

LatencySampler::LatencySampler(const LatencyModel& model)
    : model_(model), rng_(mix_seed(model.seed, 0x1a7e)) {
  model_.validate();
}

Micros LatencySampler::draw(Branch b) {
  const auto& r = model_.range(b);
  const auto lo = from_ms(r.min_ms);
  const auto hi = from_ms(r.max_ms);
  switch (model_.noise) {
    case Noise::None:
      return from_ms(r.mid_ms());
    case Noise::Uniform: {
      std::uniform_int_distribution<std::int64_t> d(lo.count(), hi.count());
      return Micros{d(rng_)};
    }
    case Noise::TruncatedGaussian: {
      // sigma = width/6; rejection keeps the draw inside [lo, hi].
      const double sigma = std::max((r.max_ms - r.min_ms) / 6.0, 1e-9);
      std::normal_distribution<double> d(r.mid_ms(), sigma);
      for (;;) {
        const auto v = from_ms(d(rng_));
        if (v >= lo && v <= hi) return v;
      }
    }
  }
  return from_ms(r.mid_ms());
}

}  // namespace flowinfer
