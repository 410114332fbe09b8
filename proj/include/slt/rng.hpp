#pragma once

#include <cmath>
#include <cstdint>

namespace slt {

// SplitMix64 output function. All randomness in the library is derived from
// this mixer so that results are reproducible bit-for-bit from a single
// 64-bit master seed, independent of platform and thread count.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based stream split: mix_seed(a, b) feeds `a` through one SplitMix64
// step, xors the tag `b` into the state and takes another step.  Nested calls
// derive replicate/chain/purpose streams:
//   replicate_seed = mix_seed(mix_seed(master, n), replicate_index)
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64_next(s);
  s = h ^ b;
  return splitmix64_next(s);
}

// Deterministic generator over the SplitMix64 sequence.  Gaussian variates
// use Box-Muller on the raw 53-bit uniforms; std::normal_distribution is
// avoided because its output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in [a, b)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return next_u64() % n;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace slt
