#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Core>

namespace cooccur {

/// Deterministic random stream built on std::mt19937_64, whose output
/// sequence is fixed by the standard. All real-valued draws are mapped from
/// raw 64-bit outputs here rather than through std::*_distribution, so a
/// given seed produces the same draws on every platform.
///
/// Stream splitting: independent sub-streams are derived as
///   substream(seed, k) = mix64(seed + (k + 1) * 0x9E3779B97F4A7C15)
/// where mix64 is the SplitMix64 finalizer. Simulation uses one sub-stream
/// per site, record expansion one per history cell, and fitting one per
/// optimizer start, so parallel and serial execution consume identical
/// streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed + (index + 1) * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform draw on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform draw on (-1, 1).
  double uniform_sym() { return 2.0 * uniform() - 1.0; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index draw from an unnormalized nonnegative weight vector (CDF walk).
  int categorical(const Eigen::VectorXd& weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    const int n = static_cast<int>(weights.size());
    for (int k = 0; k < n; ++k) {
      u -= weights[k];
      if (u < 0.0) return k;
    }
    return n - 1;  // guard against accumulated rounding
  }

  /// Poisson draw by inversion of exponential interarrivals (Knuth).
  /// Fine for the small means used here.
  int poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    if (mean == 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cooccur
