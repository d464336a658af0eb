#pragma once

#include <cmath>
#include <cstdint>

#include "dfkd/common.hpp"

namespace dfkd {

// Deterministic 64-bit generator (splitmix64, Steele et al. constants:
// increment 0x9E3779B97F4A7C15, mix 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB).
// Used everywhere instead of <random> distributions so that identical seeds
// produce identical bits on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free multiply-shift; bias is
  // below 2^-32 for the n used here (class counts, pixel offsets).
  int64_t uniform_int(int64_t n) {
    check<UsageError>(n > 0, "uniform_int needs n > 0, got ", n);
    return static_cast<int64_t>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the cosine branch only, so one draw
  // consumes exactly two uniforms and sequences stay easy to reason about.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derive an independent stream, e.g. per sample or per worker.
  static Rng child(uint64_t seed, uint64_t stream) {
    Rng mix(seed ^ (0x632BE59BD9B4E019ULL * (stream + 1)));
    return Rng(mix.next_u64());
  }

 private:
  uint64_t state_;
};

}  // namespace dfkd
