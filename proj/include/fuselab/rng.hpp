#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fuselab {

/// Deterministic random generator shared by every randomized operation.
///
/// std::mt19937_64 is fully specified by the C++ standard, so the raw
/// 64-bit stream is identical on every platform. The standard leaves
/// std::uniform_real_distribution and std::normal_distribution
/// implementation-defined, so the float conversions below are done by
/// hand: uniform doubles take the top 53 bits, normals use Box-Muller.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// SplitMix64 finalizer, used to derive independent substreams from a
  /// base seed plus stream identifiers (frame id, camera id, epoch, ...).
  static std::uint64_t split(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return split(a ^ (split(b) + 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p = 0.5) { return uniform() < p; }

  /// Standard normal via Box-Muller; the second variate of each pair is
  /// cached so the draw count per call is deterministic.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fuselab
