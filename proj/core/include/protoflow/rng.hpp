#pragma once

#include <cmath>
#include <cstdint>

#include "protoflow/vec.hpp"

namespace protoflow {

// Counter-based deterministic RNG (splitmix64 finalizer over key + counter).
// Identical seed gives a byte-identical stream; split() derives independent
// streams so parallel workers never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed + 0x9E3779B97F4A7C15ull * (stream + 1))), counter_(0) {}

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    return mix(key_ ^ counter_);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Widening-multiply rejection-free mapping; bias < 2^-64, irrelevant here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream. Does not advance this stream.
  Rng split(std::uint64_t stream) const {
    Rng child(0);
    child.key_ = mix(key_ + mix(stream + 0xD1B54A32D192ED03ull));
    child.counter_ = 0;
    child.has_spare_ = false;
    return child;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// n i.i.d. samples from an isotropic Gaussian around `mean`.
inline std::vector<Vec> sample_normal(Rng& rng, const Vec& mean, double stddev,
                                      std::size_t n) {
  std::vector<Vec> out(n, Vec(mean.size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < mean.size(); ++d)
      out[i][d] = mean[d] + stddev * rng.normal();
  return out;
}

}  // namespace protoflow
