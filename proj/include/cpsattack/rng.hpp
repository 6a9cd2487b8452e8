#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "cpsattack/error.hpp"

namespace cpsattack {

// splitmix64 finalizer; used to derive independent per-episode seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded random stream. The std distributions are implementation-defined, so
// uniform draws are built directly from engine bits to keep runs bit-identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream for episode `index` of a run seeded with `master`. Depends only on
  // (master, index), never on scheduling.
  static Rng for_episode(std::uint64_t master, std::uint64_t index) {
    return Rng(mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL)));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    if (n == 0) throw DomainError("Rng::below: empty range");
    auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Draws an index with probability proportional to `weights`. Zero-weight
// entries are never returned.
inline std::size_t weighted_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("weighted_index: negative or NaN weight");
    total += w;
  }
  if (weights.empty() || !(total > 0.0)) throw DomainError("weighted_index: no positive weight");

  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;  // rounding pushed u past the final partial sum
}

}  // namespace cpsattack
