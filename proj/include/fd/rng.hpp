#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace fd {

// Counter-based deterministic PRNG built on SplitMix64. Streams are derived
// by hashing a root seed with an arbitrary list of stream keys, so any task
// (burst index, learner index, MC pass) gets an independent, reproducible
// stream regardless of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = mix(seed ^ kGolden);
    for (std::uint64_t k : keys) s = mix(s ^ mix(k + kGolden));
    return Rng(FromState{}, s);
  }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1], safe for log().
  double uniform_open0() { return 1.0 - uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Rayleigh(sigma=1) magnitude via inverse CDF.
  double rayleigh() { return std::sqrt(-2.0 * std::log(uniform_open0())); }

  // Weibull(shape k, scale 1) magnitude via inverse CDF.
  double weibull(double shape) { return std::pow(-std::log(uniform_open0()), 1.0 / shape); }

  bool coin() { return (next_u64() & 1u) != 0; }

 private:
  struct FromState {};
  Rng(FromState, std::uint64_t s) : state_(s) {}

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fd
