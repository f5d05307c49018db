#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gsmrl {

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. Substreams are derived deterministically from (seed, key...)
/// so that an episode's randomness does not depend on how many draws other episodes made.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng substream(std::uint64_t key) const { return Rng(mix64(seed_ ^ mix64(key + 0x5851f42d4c957f2dULL))); }
  Rng substream(std::uint64_t a, std::uint64_t b) const { return substream(a).substream(b); }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  /// Draw from an unnormalized discrete distribution.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      last_positive = k;
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    return last_positive;
  }

  /// Dirichlet draw via normalized Gamma variates.
  std::vector<double> dirichlet(std::span<const double> concentration) {
    std::vector<double> out(concentration.size());
    double total = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = gamma(concentration[k]);
      total += out[k];
    }
    if (total <= 0.0) {
      // All gammas underflowed (tiny concentrations): fall back to a one-hot on the largest concentration.
      std::size_t best = 0;
      for (std::size_t k = 1; k < out.size(); ++k)
        if (concentration[k] > concentration[best]) best = k;
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = k == best ? 1.0 : 0.0;
      return out;
    }
    for (double& v : out) v /= total;
    return out;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace gsmrl
