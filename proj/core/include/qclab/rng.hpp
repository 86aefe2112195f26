#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace qclab {

/// Deterministic random stream with a bit-stable mapping to doubles.
///
/// std::mt19937_64 produces an identical integer stream on every conforming
/// implementation, but the standard *distributions* do not: their draw
/// algorithms are implementation-defined. Reports compare across toolchains,
/// so both the uniform mapping (53-bit mantissa scaling) and the normal
/// sampler (Box-Muller) are spelled out here instead of delegated to
/// <random> distribution objects.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1): top 53 bits of the draw scaled by 2^-53.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-free modulo is fine here: n is
  /// always tiny (grid indices, sample slots) relative to 2^64, so the bias
  /// is far below one part in 2^32.
  std::uint64_t index(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller on two fresh uniforms.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qclab
