#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ppsel {

// xoshiro256++ with splitmix64 seeding. Satisfies UniformRandomBitGenerator,
// so the <random> distributions work on top of it. Streams are derived, not
// jumped: every consumer builds its generator from (master seed, path of
// integer tags), which keeps replicates independent of execution order and
// makes all output a pure function of the seed.
class Rng {
public:
  using result_type = std::uint64_t;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  explicit Rng(std::uint64_t seed) {
    std::uint64_t t = seed;
    for (auto& word : state_) word = splitmix64(t);
  }

  // Child stream addressed by a tag path, e.g. derive(seed, {kSim, cell, rep}).
  static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t t = master;
    splitmix64(t);
    for (std::uint64_t tag : path) {
      t ^= tag + 0x9E3779B97F4A7C15ULL + (t << 6) + (t >> 2);
      splitmix64(t);
    }
    return Rng(t);
  }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double sd = 1.0) {
    if (sd <= 0.0) return mean;
    std::normal_distribution<double> d(mean, sd);
    return d(*this);
  }

  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long> d(mean);
    return d(*this);
  }

  // Bernoulli with success probability p.
  bool bernoulli(double p) { return uniform() < p; }

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_;
};

}  // namespace ppsel
