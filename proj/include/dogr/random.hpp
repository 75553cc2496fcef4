#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dogr {

/// Portable random source: std::mt19937_64 (fully specified by the standard)
/// with hand-written transforms, so streams are identical on every platform.
/// The standard distributions are implementation defined and are not used.
///
///   uniform()      (bits >> 11) * 2^-53, in [0, 1)
///   uniform_open() ((bits >> 11) + 0.5) * 2^-53, in (0, 1)
///   normal()       Box-Muller pairs; the second variate is cached
///   below(n)       rejection sampling on the top of the 64-bit range
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform_open();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  double exponential();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Dirichlet(1, ..., 1) draw of length k.
  std::vector<double> dirichlet_uniform(std::size_t k);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dogr
