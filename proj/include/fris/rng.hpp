#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "fris/common.hpp"

namespace fris {

/// Counter-based pseudo-random generator. Every output is a hash of
/// (key, counter), so independent substreams can be split off with
/// derive() and draws stay identical at any worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static Rng from_seed(std::uint64_t seed) { return Rng(mix(seed ^ 0x5851f42d4c957f2dULL)); }

  /// Independent substream; stable regardless of how many values were
  /// drawn from the parent.
  [[nodiscard]] Rng derive(std::uint64_t stream) const {
    return Rng(mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL)));
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index in [0, n) proportional to the (non-negative) weights.
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  /// Circularly symmetric complex Gaussian with unit mean power.
  std::complex<double> complex_normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-std::log(u1));
    return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace fris
