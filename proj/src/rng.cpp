#include "bfl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bfl/core.hpp"
#include "bfl/encoding.hpp"

namespace bfl {

Rng Rng::stream(std::uint64_t seed, std::string_view label, std::uint64_t a, std::uint64_t b) {
  Encoder enc;
  enc.str("bfl/rng/v1").u64(seed).str(label).u64(a).u64(b);
  const HashKey h = sha256(enc.data());
  std::uint64_t s = 0;
  for (int i = 0; i < 8; ++i) s |= static_cast<std::uint64_t>(h.digest[i]) << (8 * i);
  return Rng(s);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below needs a positive bound");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::exponential() {
  double u = uniform01();
  while (u <= 0.0) u = uniform01();
  return -std::log(u);
}

}  // namespace bfl
