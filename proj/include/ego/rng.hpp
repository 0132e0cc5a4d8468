#pragma once

// Seeded generator whose draws are identical on every standard library:
// std::mt19937_64 is fully specified, while the std distributions are not.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ego {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

  /// Box-Muller; the second variate is discarded so each call consumes two draws.
  double normal(double mean = 0.0, double sigma = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Knuth's multiplication method; fine for the small means used here.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double L = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > L);
    return k - 1;
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ego
