// Deterministic random streams.
//
// Every stochastic component takes an explicit Rng so that runs are exactly
// reproducible from a single master seed. Independent sub-streams are derived
// by mixing the parent seed with a tag (splitmix64 finalizer), which keeps
// streams aligned across code paths that consume different draw counts.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace deepssc {

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  // Independent stream derived from this stream's seed (not its state).
  Rng child(uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (avoids the implementation-defined
  // std::normal_distribution so streams are stable across toolchains).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Circularly-symmetric complex Gaussian, E|z|^2 = 1.
  std::complex<double> complex_normal() {
    const double s = 0.7071067811865475244;  // 1/sqrt(2)
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
  }

  // Uniform integer in [0, n), unbiased.
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream tags for the named sub-streams of an experiment. Keeping these in
// one table documents which parts of a run draw from which stream.
namespace stream {
constexpr uint64_t kSplit = 1;
constexpr uint64_t kInit = 2;
constexpr uint64_t kBatches = 3;
constexpr uint64_t kChannel = 4;
constexpr uint64_t kEval = 5;
constexpr uint64_t kSynthetic = 6;
}  // namespace stream

}  // namespace deepssc
