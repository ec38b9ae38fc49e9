#pragma once

#include <cstdint>
#include <random>

namespace illumseg {

/// Seeded generator with portable output: std::mt19937_64 (bit-exact by the
/// standard) plus distribution transforms implemented here, since the standard
/// library distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (no cached second variate).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace illumseg
