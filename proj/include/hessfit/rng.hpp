#pragma once

#include <cstdint>
#include <cmath>

#include "hessfit/matrix.hpp"

namespace hessfit {

// Counter-based pseudorandom generator: output i is a pure hash of
// (key, i), so a stream is fully determined by (seed, stream) and can be
// reproduced in any language. Normal variates use the Box-Muller transform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed) ^ (stream * 0xD1342543DE82EF95ULL))) {}

  std::uint64_t next_u64() { return mix(key_ + counter_++); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; used where log(u) must stay finite.
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(std::size_t n) {
    Vector v(n);
    for (double& x : v) x = normal();
    return v;
  }

  Vector uniform_vector(std::size_t n) {
    Vector v(n);
    for (double& x : v) x = uniform();
    return v;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace hessfit
