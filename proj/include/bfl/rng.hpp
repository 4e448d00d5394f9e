#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bfl {

/// mt19937_64 with distribution code written out here, because the standard
/// library's distributions are implementation-defined and transcripts must
/// not depend on which one we were built against.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (seed, label, a, b) via SHA-256.
  static Rng stream(std::uint64_t seed, std::string_view label, std::uint64_t a = 0,
                    std::uint64_t b = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller.
  double normal();

  /// Exponential(1).
  double exponential();

  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bfl
