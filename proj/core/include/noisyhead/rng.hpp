// Seeded, splittable random streams for reproducible Monte Carlo runs.
//
// Every stream is addressed by (master_seed, stream_id). Streams created
// with the same address produce bit-identical draw sequences on every run
// and under any worker count, so parallel trials can be scheduled freely.
// The normal sampler is hand-rolled (Marsaglia polar) because the standard
// library leaves std::normal_distribution's algorithm unspecified.

#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace noisyhead {

/// SplitMix64 finalizer; used to decorrelate seeds and fold stream parts.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Folds an arbitrary tuple of integers into one stream id.
template <typename... Parts>
constexpr std::uint64_t stream_id(Parts... parts) {
  std::uint64_t h = 0x853c49e6748fea9bull;
  ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(parts)))), ...);
  return h;
}

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t id)
      : engine_(splitmix64(splitmix64(master_seed) ^ splitmix64(id ^ 0xda3e39cb94b95bdbull))) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Unbiased uniform integer in [0, n) by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /// Standard normal via the polar method; second value of each pair cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Eigen::VectorXd normal_vector(Eigen::Index d) {
    Eigen::VectorXd out(d);
    for (Eigen::Index i = 0; i < d; ++i) out[i] = normal();
    return out;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace noisyhead
