#include "dogr/random.hpp"

#include <cmath>
#include <numbers>

namespace dogr {

namespace {
constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * kTwoPow53Inv; }

double Rng::uniform_open() { return (static_cast<double>(next() >> 11) + 0.5) * kTwoPow53Inv; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::exponential() { return -std::log(uniform_open()); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Largest multiple of n representable; draws above it are rejected.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
  std::uint64_t draw;
  do {
    draw = next();
  } while (draw > limit);
  return draw % n;
}

std::vector<double> Rng::dirichlet_uniform(std::size_t k) {
  std::vector<double> out(k);
  double total = 0.0;
  for (auto& v : out) {
    v = exponential();
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace dogr
