#pragma once

// Deterministic random number generation. All randomness in the library flows
// through Rng so that datasets and results are reproducible bit-for-bit across
// runs and worker counts: parallel code derives one child seed per work item
// with Rng::derive and never shares engines between items.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace qelm {

namespace detail {

// splitmix64 step; used both for seed derivation and engine seeding.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Child seed for work item `index` on stream `stream`. Mixing is one-way so
  // sibling streams are statistically independent of each other and of the
  // parent.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = detail::splitmix64(s);
    s ^= stream * 0xd1342543de82ef95ull;
    std::uint64_t b = detail::splitmix64(s);
    s ^= index * 0xaf251af3b0f025b5ull;
    std::uint64_t c = detail::splitmix64(s);
    return a ^ (b << 1) ^ c;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution. Distributions are implemented
  // by hand (not via <random> adaptors) so results do not depend on the
  // standard library implementation.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be > 0");
    std::size_t k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  // Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exact Poisson sampling. Inversion by multiplication for small means; for
  // large means the variate is split as a sum of independent halves, which is
  // again Poisson, so no approximation is introduced.
  std::int64_t poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
      throw std::invalid_argument("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean > 30.0) return poisson(mean / 2.0) + poisson(mean - mean / 2.0);
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      prod *= uniform();
      ++k;
    }
    return k;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qelm
