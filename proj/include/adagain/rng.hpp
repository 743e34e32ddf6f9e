#pragma once

#include <cstdint>
#include <random>

namespace adagain {

// Seeded random stream; one instance per run so runs replay exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double normal(double mean, double stddev) {
    return mean + stddev * normal_(gen_);
  }

  // [0, 1)
  double uniform() { return unit_(gen_); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(gen_); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace adagain
