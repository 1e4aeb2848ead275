#include "focus/hypernet.hpp"

#include <cmath>

#include "focus/ops.hpp"

namespace focus::hyper {

Tensor squash(const Tensor& k, double lambda) {
  if (lambda < 0.0) throw ConfigError("squash: lambda must be non-negative");
  if (k.is_complex()) throw DimensionError("squash: real tensor expected");
  Tensor out = Tensor::zeros(k.shape());
  auto K = k.values();
  auto O = out.values();
  for (size_t i = 0; i < K.size(); ++i) {
    const double mag = std::abs(K[i]) - lambda;
    O[i] = mag > 0.0 ? std::copysign(mag, K[i]) : 0.0;
  }
  record_op(out, {k}, [k, lambda](const Tensor& o) {
    Tensor tk = k;
    auto G = o.grad();
    auto K = k.values();
    auto GK = tk.grad_mut();
    for (size_t i = 0; i < K.size(); ++i) {
      if (std::abs(K[i]) > lambda) GK[i] += G[i];
    }
  });
  return out;
}

Tensor global_conv(const Tensor& x, const GlobalConvParams& p) {
  if (x.rank() < 2 || x.is_complex()) {
    throw DimensionError("global_conv: expected real (..., L, D), got " + shape_str(x.shape()));
  }
  const int64_t L = x.dim(-2);
  const int64_t D = x.dim(-1);
  if (p.kernel.rank() != 2 || p.kernel.dim(1) != D) {
    throw DimensionError("global_conv: kernel " + shape_str(p.kernel.shape()) +
                         " does not match width " + std::to_string(D));
  }
  if (L > p.kernel.dim(0)) {
    throw ConfigError("global_conv: sequence length " + std::to_string(L) + " exceeds kernel length " +
                      std::to_string(p.kernel.dim(0)));
  }
  const int64_t n = next_power_of_two(2 * L);
  const int r = x.rank();

  Tensor k = transpose(squash(slice_axis(p.kernel, 0, 0, L), p.squash_lambda), 0, 1);  // (D, L)
  Tensor kf = fft_lastdim(pad_axis(k, 1, 0, n - L));
  Tensor xf = fft_lastdim(pad_axis(transpose(x, r - 1, r - 2), r - 1, 0, n - L));  // (..., D, n)
  Tensor y = real_part(ifft_lastdim(mul(xf, kf)));
  return transpose(slice_axis(y, r - 1, 0, L), r - 1, r - 2);
}

Tensor make_embedding(const Tensor& x, const GlobalConvParams& p, int64_t O, int64_t nbins) {
  if (O < 1 || nbins < 1) throw ConfigError("make_embedding: O and nbins must be positive");
  const int64_t L = x.dim(-2);
  if (L < O * nbins) {
    throw ConfigError("make_embedding: sequence length " + std::to_string(L) +
                      " is shorter than O*nbins = " + std::to_string(O * nbins));
  }
  const int r = x.rank();
  Tensor pooled = adaptive_maxpool_time(transpose(global_conv(x, p), r - 1, r - 2), O * nbins);
  Shape split(pooled.shape().begin(), pooled.shape().end() - 1);
  split.push_back(nbins);
  split.push_back(O);
  // (..., D, nbins, O) -> (..., nbins, D, O)
  return transpose(reshape(pooled, split), r - 1, r - 2);
}

Tensor generate_theta(const Tensor& embedding, const HyperMlpParams& p, int64_t F) {
  if (embedding.rank() < 3 || embedding.dim(-1) != p.w1.dim(0)) {
    throw DimensionError("generate_theta: embedding " + shape_str(embedding.shape()) +
                         " does not match w1 " + shape_str(p.w1.shape()));
  }
  if (p.w2.dim(1) != 2 * F) {
    throw DimensionError("generate_theta: w2 emits " + std::to_string(p.w2.dim(1)) +
                         " values, expected 2F = " + std::to_string(2 * F));
  }
  Tensor h = sigmoid(add(matmul(embedding, p.w1), p.b1));
  Tensor out = sigmoid(add(matmul(h, p.w2), p.b2));
  Shape s(out.shape().begin(), out.shape().end() - 1);
  s.push_back(F);
  s.push_back(2);
  return reshape(out, s);
}

Tensor causal_shift(const Tensor& theta) {
  if (theta.rank() < 4) throw DimensionError("causal_shift: theta must be (..., nbins, D, F, 2)");
  const int axis = theta.rank() - 4;
  const int64_t nbins = theta.dim(axis);
  if (nbins < 1) throw DimensionError("causal_shift: no bins");
  return pad_axis(slice_axis(theta, axis, 0, nbins - 1), axis, 1, 0);
}

GlobalConvParams init_global_conv(Rng& rng, int64_t max_len, int64_t channels, double squash_lambda) {
  GlobalConvParams conv;
  conv.kernel = rng.normal_tensor({max_len, channels}, 0.0, 1.0 / std::sqrt(static_cast<double>(max_len)));
  conv.squash_lambda = squash_lambda;
  return conv;
}

HyperMlpParams init_hyper_mlp(Rng& rng, int64_t oversampling, int64_t hidden, int64_t filters) {
  HyperMlpParams mlp;
  const double b1 = xavier_bound(oversampling, hidden);
  mlp.w1 = rng.uniform_tensor({oversampling, hidden}, -b1, b1);
  mlp.b1 = Tensor::zeros({hidden});
  const double b2 = 0.1 * xavier_bound(hidden, 2 * filters);
  mlp.w2 = rng.uniform_tensor({hidden, 2 * filters}, -b2, b2);
  mlp.b2 = Tensor::zeros({2 * filters});
  return mlp;
}

void init_hypernet(Rng& rng, const HypernetInit& cfg, GlobalConvParams& conv, HyperMlpParams& mlp) {
  if (cfg.max_len < 1 || cfg.channels < 1 || cfg.oversampling < 1 || cfg.hidden < 1 || cfg.filters < 1) {
    throw ConfigError("init_hypernet: all extents must be positive");
  }
  conv = init_global_conv(rng, cfg.max_len, cfg.channels, cfg.squash_lambda);
  mlp = init_hyper_mlp(rng, cfg.oversampling, cfg.hidden, cfg.filters);
}

}  // namespace focus::hyper
