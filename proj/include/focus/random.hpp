#pragma once

#include <cstdint>
#include <random>

#include "focus/tensor.hpp"

namespace focus {

/// Seeded generator shared by initializers and data generators.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // Uniform integer in [0, n).
  int64_t index(int64_t n) { return std::uniform_int_distribution<int64_t>(0, n - 1)(engine_); }
  uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

  Tensor uniform_tensor(Shape shape, double lo, double hi);
  Tensor normal_tensor(Shape shape, double mean, double stddev);

 private:
  std::mt19937_64 engine_;
};

// Xavier/Glorot uniform bound sqrt(6 / (fan_in + fan_out)).
double xavier_bound(int64_t fan_in, int64_t fan_out);

}  // namespace focus
