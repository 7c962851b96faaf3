#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace idlegrad {

// Purpose tag for a random stream. Every consumer of randomness owns a
// dedicated stream keyed by (master seed, replica index, purpose), so
// Monte-Carlo replicas are reproducible and independent of execution order.
enum class Stream : std::uint64_t {
  graph_gen = 1,
  data_gen = 2,
  init = 3,
  activation = 4,
  async_bits = 5,
  gossip = 6,
  shuffle = 7,
  scratch = 8,
};

namespace detail {
// SplitMix64 finalizer; used to derive well-separated seeds for streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// One independent, reproducible random stream.
//
// The underlying generator is std::mt19937_64, whose output sequence is
// fully specified by the C++ standard. All variate transforms below are
// implemented manually (instead of std::*_distribution) because the standard
// leaves distribution algorithms implementation-defined; with the manual
// transforms a fixed seed yields bit-identical draws on every platform.
class Rng {
 public:
  Rng(std::uint64_t master_seed, std::uint64_t replica, Stream purpose)
      : gen_(detail::mix64(
            detail::mix64(detail::mix64(master_seed) ^ (replica + 1)) ^
            static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1): top 53 bits of one 64-bit draw.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // log(0) guard; probability 2^-53
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform on {0, ..., n-1}, unbiased via rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = (UINT64_MAX / n) * n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace idlegrad
