#include "focus/random.hpp"

#include <cmath>

namespace focus {

Tensor Rng::uniform_tensor(Shape shape, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = uniform(lo, hi);
  return t;
}

Tensor Rng::normal_tensor(Shape shape, double mean, double stddev) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = normal(mean, stddev);
  return t;
}

double xavier_bound(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace focus
