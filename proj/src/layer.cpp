#include "focus/layer.hpp"

#include <cmath>
#include <limits>

#include "focus/ops.hpp"
#include "focus/spectral.hpp"

namespace focus {

namespace {

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError(key + ": " + why);
}

Tensor causal_mask(int64_t M) {
  Tensor m = Tensor::zeros({M, M});
  auto v = m.values();
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = i + 1; j < M; ++j) v[static_cast<size_t>(i * M + j)] = -std::numeric_limits<double>::infinity();
  }
  return m;
}

Tensor xavier(Rng& rng, int64_t fan_in, int64_t fan_out) {
  const double b = xavier_bound(fan_in, fan_out);
  return rng.uniform_tensor({fan_in, fan_out}, -b, b);
}

}  // namespace

void FocusConfig::validate() const {
  require(seq_len >= 1, "L", "must be positive");
  require(width >= 1, "D", "must be positive");
  require(att_width >= 1, "D_att", "must be positive");
  require(is_power_of_two(nfft), "NFFT", "must be a power of two, got " + std::to_string(nfft));
  require(filters >= 1, "F", "must be at least 1");
  require(chunk >= 1 && chunk <= seq_len, "M", "must lie in [1, L]");
  require(oversampling >= 1 && nfft % oversampling == 0, "O", "must divide NFFT");
  require(hidden >= 1, "hidden", "must be positive");
  require(n_layers >= 0, "layers", "must be non-negative");
  require(vocab >= 2, "vocab", "must be at least 2");
  require(squash_lambda >= 0.0, "squash_lambda", "must be non-negative");
}

int64_t FocusConfig::nbins() const { return spectral::bins_for(seq_len, nfft); }
int64_t FocusConfig::padded_len() const { return nbins() * nfft; }

Tensor chunk(const Tensor& x, int64_t M) {
  if (x.rank() < 2) throw DimensionError("chunk: expected (..., L, D)");
  const int64_t L = x.dim(-2);
  if (M < 1 || L % M != 0) {
    throw ConfigError("chunk: length " + std::to_string(L) + " is not a multiple of M=" + std::to_string(M));
  }
  Shape s(x.shape().begin(), x.shape().end() - 2);
  s.push_back(L / M);
  s.push_back(M);
  s.push_back(x.dim(-1));
  return reshape(x, s);
}

Tensor dechunk(const Tensor& chunks) {
  if (chunks.rank() < 3) throw DimensionError("dechunk: expected (..., C, M, D)");
  Shape s(chunks.shape().begin(), chunks.shape().end() - 3);
  s.push_back(chunks.dim(-3) * chunks.dim(-2));
  s.push_back(chunks.dim(-1));
  return reshape(chunks, s);
}

Tensor chunked_causal_attention(const Tensor& x_chunks, const Tensor& xf_chunks, const FocusLayerParams& p) {
  if (x_chunks.shape() != xf_chunks.shape() || x_chunks.rank() < 3) {
    throw DimensionError("attention: chunk shapes differ: " + shape_str(x_chunks.shape()) + " vs " +
                         shape_str(xf_chunks.shape()));
  }
  const int64_t M = x_chunks.dim(-2);
  Tensor q = matmul(x_chunks, p.q);
  Tensor k = matmul(xf_chunks, p.k);
  Tensor v = matmul(xf_chunks, p.v);
  Tensor scores = scale(matmul_bt(q, k), 1.0 / std::sqrt(static_cast<double>(p.q.dim(1))));
  return matmul(softmax_lastdim(scores, causal_mask(M)), v);
}

Tensor gates(const Tensor& x_f, const Tensor& y, const Tensor& residual, const FocusLayerParams& p) {
  Tensor gamma = silu(add(matmul(x_f, p.w_gamma), p.b_gamma));
  Tensor phi = sigmoid(add(matmul(x_f, p.w_phi), p.b_phi));
  Tensor z = silu(add(add(matmul(x_f, p.w_h), matmul(mul(gamma, y), p.u_h)), p.b_h));
  return add(residual, mul(phi, sub(z, residual)));
}

Tensor pad_to_bins(const Tensor& x, const FocusConfig& cfg) {
  const int64_t L = x.dim(-2);
  const int64_t padded = spectral::bins_for(L, cfg.nfft) * cfg.nfft;
  return padded == L ? x : pad_axis(x, x.rank() - 2, 0, padded - L);
}

Tensor layer_theta(const Tensor& x, const FocusLayerParams& p, const FocusConfig& cfg,
                   const Tensor* shared_embedding) {
  const int64_t nbins = spectral::bins_for(x.dim(-2), cfg.nfft);
  if (cfg.ablation) {
    Tensor th = sigmoid(p.theta_static);  // (1, D, F, 2)
    Shape target(x.shape().begin(), x.shape().end() - 2);
    target.push_back(nbins);
    target.push_back(cfg.width);
    target.push_back(cfg.filters);
    target.push_back(2);
    return hyper::causal_shift(add(Tensor::zeros(target), th));
  }
  Tensor e;
  if (shared_embedding) {
    e = *shared_embedding;
  } else {
    if (!p.conv) throw ContractError("layer_theta: layer has no global convolution and no shared embedding");
    e = hyper::make_embedding(pad_to_bins(x, cfg), *p.conv, cfg.oversampling, nbins);
  }
  return hyper::causal_shift(hyper::generate_theta(e, p.mlp, cfg.filters));
}

Tensor focus_forward(const Tensor& x, const FocusLayerParams& p, const FocusConfig& cfg, const FocusOptions& opt) {
  if (x.rank() < 2 || x.dim(-1) != cfg.width) {
    throw DimensionError("focus_forward: expected (..., L, " + std::to_string(cfg.width) + "), got " +
                         shape_str(x.shape()));
  }
  const int64_t L = x.dim(-2);
  const int axis = x.rank() - 2;
  Tensor theta = opt.theta_override ? *opt.theta_override : layer_theta(x, p, cfg, opt.shared_embedding);
  Tensor x_f = spectral::filter_sequence(x, theta, cfg.nfft);

  const int64_t M = std::min(cfg.chunk, L);
  const int64_t padded = (L + M - 1) / M * M;
  Tensor xa = padded == L ? x : pad_axis(x, axis, 0, padded - L);
  Tensor xfa = padded == L ? x_f : pad_axis(x_f, axis, 0, padded - L);
  Tensor y = dechunk(chunked_causal_attention(chunk(xa, M), chunk(xfa, M), p));
  if (padded != L) y = slice_axis(y, axis, 0, L);
  if (p.w_out.defined()) y = matmul(y, p.w_out);

  if (opt.trace) *opt.trace = {theta, x_f};
  return gates(x_f, y, opt.residual ? *opt.residual : x, p);
}

FocusLayerParams init_focus_layer(Rng& rng, const FocusConfig& cfg) {
  const int64_t D = cfg.width, A = cfg.att_width;
  FocusLayerParams p;
  p.q = xavier(rng, D, A);
  p.k = xavier(rng, D, A);
  p.v = xavier(rng, D, A);
  if (A != D) p.w_out = xavier(rng, A, D);
  p.w_gamma = xavier(rng, D, D);
  p.w_phi = xavier(rng, D, D);
  p.w_h = xavier(rng, D, D);
  p.u_h = xavier(rng, D, D);
  p.b_gamma = Tensor::zeros({D});
  p.b_phi = Tensor::zeros({D});
  p.b_h = Tensor::zeros({D});
  if (cfg.ablation) {
    p.theta_static = Tensor::zeros({1, D, cfg.filters, 2});
  } else {
    p.mlp = hyper::init_hyper_mlp(rng, cfg.oversampling, cfg.hidden, cfg.filters);
    if (!cfg.share_hyper_embedding) {
      p.conv = hyper::init_global_conv(rng, cfg.padded_len(), D, cfg.squash_lambda);
    }
  }
  return p;
}

}  // namespace focus
