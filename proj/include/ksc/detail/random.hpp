#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ksc::detail {

// All stochastic output in this library flows through this wrapper so that
// fixtures reproduce bit-for-bit on any platform. The generator is the
// standard-specified mt19937_64; doubles are derived from the raw 64-bit
// stream by fixed transforms rather than std::*_distribution (whose
// algorithms are implementation-defined).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1): top 53 bits of the raw draw.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via the Box-Muller transform:
  ///   z = sqrt(-2 ln u1) * cos(2 pi u2),  u1 in (0,1], u2 in [0,1).
  /// Consumes exactly two uniform draws per call; the sine branch is unused.
  double gauss() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gauss(double mean, double sd) { return mean + sd * gauss(); }

private:
  std::mt19937_64 engine_;
};

} // namespace ksc::detail
