#pragma once

#include "focus/random.hpp"
#include "focus/tensor.hpp"

namespace focus::hyper {

/// Directly learned causal convolution kernel, kernel: (L_max, D).
struct GlobalConvParams {
  Tensor kernel;
  double squash_lambda = 1e-3;
};

/// Per-(bin, channel) two-layer sigmoid MLP mapping O pooled features to 2F
/// filter coefficients.
struct HyperMlpParams {
  Tensor w1;  // (O, hidden)
  Tensor b1;  // (hidden)
  Tensor w2;  // (hidden, 2F)
  Tensor b2;  // (2F)
};

// Soft threshold sign(k) * max(|k| - lambda, 0). Throws ConfigError for
// negative lambda.
Tensor squash(const Tensor& k, double lambda);

// Causal linear convolution of x (..., L, D) with the squashed kernel, per
// channel, via zero-padded FFT. Throws ConfigError when L exceeds L_max.
Tensor global_conv(const Tensor& x, const GlobalConvParams& p);

// Pooled features (..., nbins, D, O): the O maxima covering bin r form its
// feature vector. Throws ConfigError when L < O * nbins.
Tensor make_embedding(const Tensor& x, const GlobalConvParams& p, int64_t O, int64_t nbins);

// Coefficients (..., nbins, D, F, 2), every entry in (0, 1).
Tensor generate_theta(const Tensor& embedding, const HyperMlpParams& p, int64_t F);

// Bin r receives bin r-1; bin 0 becomes the identity filter (0, 0).
Tensor causal_shift(const Tensor& theta);

struct HypernetInit {
  int64_t max_len = 0;
  int64_t channels = 0;
  int64_t oversampling = 4;
  int64_t hidden = 8;
  int64_t filters = 1;
  double squash_lambda = 1e-3;
};

// Xavier-uniform first layer, 0.1-scaled Xavier last layer with zero bias,
// kernel ~ normal(0, 1 / sqrt(L_max)).
void init_hypernet(Rng& rng, const HypernetInit& cfg, GlobalConvParams& conv, HyperMlpParams& mlp);

// Kernel only, for models sharing one embedding across layers.
GlobalConvParams init_global_conv(Rng& rng, int64_t max_len, int64_t channels, double squash_lambda);
HyperMlpParams init_hyper_mlp(Rng& rng, int64_t oversampling, int64_t hidden, int64_t filters);

}  // namespace focus::hyper
