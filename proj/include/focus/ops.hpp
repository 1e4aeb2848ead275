#pragma once

#include <span>

#include "focus/tensor.hpp"

namespace focus {

// ---------------------------------------------------------------------------
// Elementwise arithmetic with trailing-dimension (NumPy style) broadcasting.
// add/sub/mul accept complex operands; a real operand meeting a complex one
// is promoted. Everything else is real-only.
// ---------------------------------------------------------------------------

enum class OpKind { Add, Sub, Mul, Div, Neg, Sigmoid, Silu, Exp, Log2, Relu };

Shape broadcast_shape(const Shape& a, const Shape& b);

// Dispatches on `kind`; binary kinds need `b`, unary kinds ignore it.
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);  // x * sigmoid(x)
Tensor exp(const Tensor& a);
Tensor log2(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Complex plumbing.
Tensor to_complex(const Tensor& a);
Tensor real_part(const Tensor& a);
Tensor imag_part(const Tensor& a);
Tensor conj(const Tensor& a);

// Reductions.
Tensor sum(const Tensor& a);   // real scalar
Tensor mean(const Tensor& a);  // real scalar
Tensor sum_axis(const Tensor& a, int axis);  // drops `axis`; real or complex

// Layout. All of these copy.
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor transpose(const Tensor& a, int axis1, int axis2);
Tensor slice_axis(const Tensor& a, int axis, int64_t start, int64_t length);
Tensor pad_axis(const Tensor& a, int axis, int64_t before, int64_t after);

// a: (..., m, k). b: (k, n) shared across the batch, or (..., k, n) with the
// same leading extents as a.
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T with b: (n, k) or (..., n, k).
Tensor matmul_bt(const Tensor& a, const Tensor& b);

// Row softmax over the last axis. `mask` is additive (0 keep, -inf drop) and
// must match the trailing extents of `a`. A row with every entry dropped
// yields zeros and increments *fully_masked_rows when provided.
Tensor softmax_lastdim(const Tensor& a, const Tensor& mask = {},
                       int64_t* fully_masked_rows = nullptr);

bool is_power_of_two(int64_t n);
int64_t next_power_of_two(int64_t n);

// Unnormalized forward DFT along the last axis; output is complex. The inverse
// scales by 1/N. Lengths must be powers of two.
Tensor fft_lastdim(const Tensor& a);
Tensor ifft_lastdim(const Tensor& a);

// Adaptive max pooling along the last (time) axis. Output window i covers
// [floor(i*T/out_len), floor((i+1)*T/out_len)); the gradient goes to the first
// maximal element of each window.
Tensor adaptive_maxpool_time(const Tensor& a, int64_t out_len);

// Layer normalization over the last axis with learned gain and bias.
Tensor layer_norm_lastdim(const Tensor& x, const Tensor& gain, const Tensor& bias,
                          double eps = 1e-5);

// Row lookup: ids of shape `ids_shape` index rows of table (V, D).
Tensor embedding(const Tensor& table, std::span<const int64_t> ids, const Shape& ids_shape);

// a: (B, L, X); picks a[b, positions[b], :] -> (B, X).
Tensor gather_positions(const Tensor& a, std::span<const int64_t> positions);

// Copies the given entries of `axis` in order; repeats are allowed and their
// gradients add up.
Tensor index_select(const Tensor& a, int axis, std::span<const int64_t> indices);

// Mean negative log-likelihood in nats. logits: (N, V), targets: N class ids.
Tensor cross_entropy(const Tensor& logits, std::span<const int64_t> targets);

}  // namespace focus
