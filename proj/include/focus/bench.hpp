#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "focus/layer.hpp"

namespace focus::bench {

struct Timing {
  double seconds = 0.0;  // median over repeats
  uint64_t flops = 0;    // instrumented count for one pass
};

// Layer config used for scaling runs: NFFT = next_pow2(ceil(L / 4)), F = 1,
// O = 4, M = chunk.
FocusConfig bench_config(int64_t L, int64_t width, int64_t chunk);

// One Focus layer forward pass on a (1, L, D) input, no tape.
Timing time_focus_forward(int64_t L, int64_t width, int64_t chunk, int repeats, uint64_t seed);

// Causal softmax attention over the whole sequence, computed tile by tile with
// a running softmax so memory stays O(L). x: (L, D); projections (D, A).
// Result (L, A).
Tensor full_causal_attention(const Tensor& x, const Tensor& q, const Tensor& k, const Tensor& v);
Timing time_full_attention(int64_t L, int64_t width, int repeats, uint64_t seed);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace focus::bench
