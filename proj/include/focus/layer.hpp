#pragma once

#include <optional>
#include <string>

#include "focus/hypernet.hpp"
#include "focus/tensor.hpp"

namespace focus {

/// Shape and behaviour knobs shared by every layer of a model.
struct FocusConfig {
  int64_t seq_len = 30;      // L
  int64_t width = 64;        // D
  int64_t att_width = 64;    // D_att
  int64_t nfft = 8;          // per-bin transform length, power of two
  int64_t filters = 1;       // F
  int64_t chunk = 30;        // M
  int64_t oversampling = 4;  // O, must divide nfft
  int64_t hidden = 8;        // hypernetwork MLP width
  int64_t n_layers = 2;
  int64_t vocab = 30;
  bool ablation = false;     // static learned coefficients instead of the hypernetwork
  bool share_hyper_embedding = false;
  double squash_lambda = 1e-3;

  // Throws ConfigError naming the offending field.
  void validate() const;
  int64_t nbins() const;       // bins covering seq_len (right padding allowed)
  int64_t padded_len() const;  // nbins * nfft
};

struct FocusLayerParams {
  Tensor q, k, v;             // (D, D_att)
  Tensor w_out;               // (D_att, D), only when D_att != D
  Tensor w_gamma, w_phi, w_h; // (D, D)
  Tensor u_h;                 // (D, D)
  Tensor b_gamma, b_phi, b_h; // (D)
  hyper::HyperMlpParams mlp;
  std::optional<hyper::GlobalConvParams> conv;  // absent when the embedding is shared
  Tensor theta_static;        // (1, D, F, 2) logits, ablation only
};

// (..., L, D) -> (..., L/M, M, D). ConfigError when M does not divide L.
Tensor chunk(const Tensor& x, int64_t M);
Tensor dechunk(const Tensor& chunks);

// Causal single-head attention inside each chunk. Queries come from x, keys
// and values from x_f. Both inputs are (..., C, M, D); result (..., C, M, D_att).
Tensor chunked_causal_attention(const Tensor& x_chunks, const Tensor& xf_chunks,
                                const FocusLayerParams& p);

// Reset/update gating. residual is the skip input mixed by the update gate.
Tensor gates(const Tensor& x_f, const Tensor& y, const Tensor& residual, const FocusLayerParams& p);

// Adaptive coefficients applied to each bin, (..., nbins, D, F, 2), already
// shifted so bin r depends only on bins before it. `shared_embedding` replaces
// the per-layer embedding when the model shares it.
Tensor layer_theta(const Tensor& x, const FocusLayerParams& p, const FocusConfig& cfg,
                   const Tensor* shared_embedding = nullptr);

struct FocusTrace {
  Tensor theta;  // coefficients actually applied
  Tensor x_f;    // filtered stream
};

struct FocusOptions {
  const Tensor* shared_embedding = nullptr;
  const Tensor* theta_override = nullptr;  // replaces layer_theta entirely
  const Tensor* residual = nullptr;        // defaults to x
  FocusTrace* trace = nullptr;
};

// One Focus layer: x (..., L, D) -> (..., L, D).
Tensor focus_forward(const Tensor& x, const FocusLayerParams& p, const FocusConfig& cfg,
                     const FocusOptions& opt = {});

FocusLayerParams init_focus_layer(Rng& rng, const FocusConfig& cfg);

// Zero-padded copy of x (..., L, D) to the bin grid, for the hypernetwork.
Tensor pad_to_bins(const Tensor& x, const FocusConfig& cfg);

}  // namespace focus
