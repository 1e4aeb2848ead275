#include "focus/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fft_kernels.hpp"

namespace focus {

namespace {

// ---------------------------------------------------------------------------
// dtype-generic element access
// ---------------------------------------------------------------------------

template <class T>
constexpr DType dtype_of() {
  return std::is_same_v<T, cplx> ? DType::Complex128 : DType::Real64;
}

template <class T>
std::span<const T> elems(const Tensor& t) {
  if constexpr (std::is_same_v<T, cplx>) {
    return t.cvalues();
  } else {
    return t.values();
  }
}

template <class T>
std::span<T> elems_mut(Tensor& t) {
  if constexpr (std::is_same_v<T, cplx>) {
    return t.cvalues();
  } else {
    return t.values();
  }
}

template <class T>
std::span<const T> grads(const Tensor& t) {
  if constexpr (std::is_same_v<T, cplx>) {
    return t.cgrad();
  } else {
    return t.grad();
  }
}

template <class T>
std::span<T> grads_mut(Tensor& t) {
  if constexpr (std::is_same_v<T, cplx>) {
    return t.cgrad_mut();
  } else {
    return t.grad_mut();
  }
}

template <class T>
T conj_if(T v) {
  if constexpr (std::is_same_v<T, cplx>) {
    return std::conj(v);
  } else {
    return v;
  }
}

int normalize_axis(int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return a;
}

size_t elem_size(const Tensor& t) { return t.is_complex() ? 2 : 1; }

void require_real(const Tensor& t, const char* op) {
  if (t.is_complex()) throw ContractError(std::string(op) + ": complex input not supported");
}

// ---------------------------------------------------------------------------
// Broadcast iteration
// ---------------------------------------------------------------------------

struct BroadcastPlan {
  Shape out;
  std::vector<int64_t> stride_a;
  std::vector<int64_t> stride_b;
  bool same = false;
};

std::vector<int64_t> contiguous_strides(const Shape& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    s[static_cast<size_t>(i)] = s[static_cast<size_t>(i) + 1] * shape[static_cast<size_t>(i) + 1];
  }
  return s;
}

BroadcastPlan make_plan(const Shape& a, const Shape& b) {
  BroadcastPlan p;
  p.out = broadcast_shape(a, b);
  p.same = a == b;
  const size_t r = p.out.size();
  auto strides_for = [&](const Shape& s) {
    std::vector<int64_t> out(r, 0);
    const auto cs = contiguous_strides(s);
    const size_t off = r - s.size();
    for (size_t i = 0; i < s.size(); ++i) out[off + i] = s[i] == 1 ? 0 : cs[i];
    return out;
  };
  p.stride_a = strides_for(a);
  p.stride_b = strides_for(b);
  return p;
}

// Calls f(i, ia, ib) for every flat output index i.
template <class F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const int64_t n = shape_numel(p.out);
  if (n == 0) return;
  if (p.same) {
    for (int64_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const size_t r = p.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const int64_t inner = p.out[r - 1];
  const int64_t sa = p.stride_a[r - 1];
  const int64_t sb = p.stride_b[r - 1];
  std::vector<int64_t> idx(r, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t base = 0; base < n; base += inner) {
    for (int64_t j = 0; j < inner; ++j) f(base + j, oa + j * sa, ob + j * sb);
    for (int d = static_cast<int>(r) - 2; d >= 0; --d) {
      const auto du = static_cast<size_t>(d);
      ++idx[du];
      oa += p.stride_a[du];
      ob += p.stride_b[du];
      if (idx[du] < p.out[du]) break;
      oa -= p.stride_a[du] * idx[du];
      ob -= p.stride_b[du] * idx[du];
      idx[du] = 0;
    }
  }
}

// ---------------------------------------------------------------------------
// Binary ops
// ---------------------------------------------------------------------------

template <class T>
Tensor binary_impl(OpKind kind, const Tensor& a, const Tensor& b) {
  const BroadcastPlan plan = make_plan(a.shape(), b.shape());
  Tensor out = Tensor::zeros(plan.out, dtype_of<T>());
  auto A = elems<T>(a);
  auto B = elems<T>(b);
  auto O = elems_mut<T>(out);
  switch (kind) {
    case OpKind::Add:
      for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) { O[i] = A[ia] + B[ib]; });
      break;
    case OpKind::Sub:
      for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) { O[i] = A[ia] - B[ib]; });
      break;
    case OpKind::Mul:
      for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) { O[i] = A[ia] * B[ib]; });
      break;
    case OpKind::Div:
      for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) { O[i] = A[ia] / B[ib]; });
      break;
    default:
      throw ContractError("binary_impl: not a binary op");
  }
  flop_counter() += static_cast<uint64_t>(O.size());

  record_op(out, {a, b}, [a, b, plan, kind](const Tensor& o) {
    Tensor ta = a, tb = b;
    auto G = grads<T>(o);
    const bool need_a = ta.requires_grad();
    const bool need_b = tb.requires_grad();
    std::span<T> GA = need_a ? grads_mut<T>(ta) : std::span<T>{};
    std::span<T> GB = need_b ? grads_mut<T>(tb) : std::span<T>{};
    auto A = elems<T>(a);
    auto B = elems<T>(b);
    switch (kind) {
      case OpKind::Add:
        for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
          if (need_a) GA[ia] += G[i];
          if (need_b) GB[ib] += G[i];
        });
        break;
      case OpKind::Sub:
        for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
          if (need_a) GA[ia] += G[i];
          if (need_b) GB[ib] -= G[i];
        });
        break;
      case OpKind::Mul:
        for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
          if (need_a) GA[ia] += G[i] * conj_if(B[ib]);
          if (need_b) GB[ib] += G[i] * conj_if(A[ia]);
        });
        break;
      case OpKind::Div:
        for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
          if (need_a) GA[ia] += G[i] / B[ib];
          if (need_b) GB[ib] -= G[i] * A[ia] / (B[ib] * B[ib]);
        });
        break;
      default:
        break;
    }
  });
  return out;
}

Tensor binary(OpKind kind, Tensor a, Tensor b) {
  if (!a.defined() || !b.defined()) throw ContractError("binary op on undefined tensor");
  if (a.is_complex() != b.is_complex()) {
    if (a.is_complex()) {
      b = to_complex(b);
    } else {
      a = to_complex(a);
    }
  }
  if (a.is_complex()) {
    if (kind == OpKind::Div) throw ContractError("div: complex operands not supported");
    return binary_impl<cplx>(kind, a, b);
  }
  return binary_impl<double>(kind, a, b);
}

// ---------------------------------------------------------------------------
// Real unary ops
// ---------------------------------------------------------------------------

template <class Fwd, class Deriv>
Tensor unary_real(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  require_real(a, name);
  Tensor out = Tensor::zeros(a.shape());
  auto A = a.values();
  auto O = out.values();
  for (size_t i = 0; i < A.size(); ++i) O[i] = fwd(A[i]);
  flop_counter() += static_cast<uint64_t>(A.size());
  record_op(out, {a}, [a, deriv](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad();
    auto X = a.values();
    auto Y = o.values();
    auto GA = ta.grad_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * deriv(X[i], Y[i]);
  });
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// GEMM through Eigen
// ---------------------------------------------------------------------------

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// C (m x n) (+)= op(A) * op(B), where op(A) is m x k and op(B) is k x n.
void gemm(const double* a, bool trans_a, const double* b, bool trans_b, double* c, int64_t m,
          int64_t n, int64_t k, bool accumulate) {
  ConstMap A(a, trans_a ? k : m, trans_a ? m : k);
  ConstMap B(b, trans_b ? n : k, trans_b ? k : n);
  MutMap C(c, m, n);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      C.noalias() += lhs * rhs;
    } else {
      C.noalias() = lhs * rhs;
    }
  };
  if (!trans_a && !trans_b) run(A, B);
  if (!trans_a && trans_b) run(A, B.transpose());
  if (trans_a && !trans_b) run(A.transpose(), B);
  if (trans_a && trans_b) run(A.transpose(), B.transpose());
  flop_counter() += static_cast<uint64_t>(2 * m * n * k);
}

// Shared implementation for matmul and matmul_bt.
Tensor matmul_impl(const Tensor& a, const Tensor& b, bool b_transposed) {
  require_real(a, "matmul");
  require_real(b, "matmul");
  if (a.rank() < 2 || b.rank() < 2) throw DimensionError("matmul: operands need rank >= 2");
  const int64_t m = a.dim(-2);
  const int64_t k = a.dim(-1);
  const int64_t kb = b_transposed ? b.dim(-1) : b.dim(-2);
  const int64_t n = b_transposed ? b.dim(-2) : b.dim(-1);
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + (b_transposed ? "^T" : ""));
  }
  const bool shared_b = b.rank() == 2;
  Shape lead(a.shape().begin(), a.shape().end() - 2);
  if (!shared_b) {
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    if (lead_b != lead) {
      throw DimensionError("matmul: batch extents differ, " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    }
  }
  const int64_t batch = shape_numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(out_shape);
  const double* A = a.values().data();
  const double* B = b.values().data();
  double* C = out.values().data();
  if (shared_b) {
    gemm(A, false, B, b_transposed, C, batch * m, n, k, false);
  } else {
    for (int64_t i = 0; i < batch; ++i) {
      gemm(A + i * m * k, false, B + i * k * n, b_transposed, C + i * m * n, m, n, k, false);
    }
  }

  record_op(out, {a, b}, [a, b, shared_b, b_transposed, batch, m, n, k](const Tensor& o) {
    Tensor ta = a, tb = b;
    const double* G = o.grad().data();
    const double* A = a.values().data();
    const double* B = b.values().data();
    if (ta.requires_grad()) {
      double* GA = ta.grad_mut().data();
      // dA = dC * op(B)^T
      if (shared_b) {
        gemm(G, false, B, !b_transposed, GA, batch * m, k, n, true);
      } else {
        for (int64_t i = 0; i < batch; ++i) {
          gemm(G + i * m * n, false, B + i * k * n, !b_transposed, GA + i * m * k, m, k, n, true);
        }
      }
    }
    if (tb.requires_grad()) {
      double* GB = tb.grad_mut().data();
      // dB = A^T dC, or dC^T A when B was used transposed.
      if (shared_b) {
        if (b_transposed) {
          gemm(G, true, A, false, GB, n, k, batch * m, true);
        } else {
          gemm(A, true, G, false, GB, k, n, batch * m, true);
        }
      } else {
        for (int64_t i = 0; i < batch; ++i) {
          if (b_transposed) {
            gemm(G + i * m * n, true, A + i * m * k, false, GB + i * k * n, n, k, m, true);
          } else {
            gemm(A + i * m * k, true, G + i * m * n, false, GB + i * k * n, k, n, m, true);
          }
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Permutation iteration: f(out_index, in_index) in units of elements.
// ---------------------------------------------------------------------------

template <class F>
void for_each_permuted(const Shape& in_shape, const std::vector<int>& perm, F&& f) {
  const size_t r = in_shape.size();
  const auto in_strides = contiguous_strides(in_shape);
  Shape out_shape(r);
  std::vector<int64_t> step(r);
  for (size_t i = 0; i < r; ++i) {
    out_shape[i] = in_shape[static_cast<size_t>(perm[i])];
    step[i] = in_strides[static_cast<size_t>(perm[i])];
  }
  const int64_t n = shape_numel(in_shape);
  if (n == 0) return;
  if (r == 0) {
    f(0, 0);
    return;
  }
  const int64_t inner = out_shape[r - 1];
  const int64_t inner_step = step[r - 1];
  std::vector<int64_t> idx(r, 0);
  int64_t off = 0;
  for (int64_t base = 0; base < n; base += inner) {
    for (int64_t j = 0; j < inner; ++j) f(base + j, off + j * inner_step);
    for (int d = static_cast<int>(r) - 2; d >= 0; --d) {
      const auto du = static_cast<size_t>(d);
      ++idx[du];
      off += step[du];
      if (idx[du] < out_shape[du]) break;
      off -= step[du] * idx[du];
      idx[du] = 0;
    }
  }
}

// (outer, axis, inner) decomposition used by slicing, padding and reductions.
struct AxisView {
  int64_t outer = 1;
  int64_t len = 1;
  int64_t inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<size_t>(i)];
  v.len = shape[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public elementwise API
// ---------------------------------------------------------------------------

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    const int64_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const int64_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError("shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    }
    out[i] = ea == 1 ? eb : ea;
  }
  return out;
}

Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div:
      return binary(kind, a, b);
    case OpKind::Neg:
      if (a.is_complex()) return scale(a, -1.0);
      return unary_real(a, "neg", [](double x) { return -x; },
                        [](double, double) { return -1.0; });
    case OpKind::Sigmoid:
      return unary_real(a, "sigmoid", sigmoid_scalar,
                        [](double, double y) { return y * (1.0 - y); });
    case OpKind::Silu:
      return unary_real(a, "silu", [](double x) { return x * sigmoid_scalar(x); },
                        [](double x, double) {
                          const double s = sigmoid_scalar(x);
                          return s * (1.0 + x * (1.0 - s));
                        });
    case OpKind::Exp:
      return unary_real(a, "exp", [](double x) { return std::exp(x); },
                        [](double, double y) { return y; });
    case OpKind::Log2:
      return unary_real(a, "log2", [](double x) { return std::log2(x); },
                        [](double x, double) { return 1.0 / (x * std::log(2.0)); });
    case OpKind::Relu:
      return unary_real(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
                        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
  }
  throw ContractError("elementwise: unknown op kind");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Div, a, b); }
Tensor neg(const Tensor& a) { return elementwise(OpKind::Neg, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(OpKind::Sigmoid, a); }
Tensor silu(const Tensor& a) { return elementwise(OpKind::Silu, a); }
Tensor exp(const Tensor& a) { return elementwise(OpKind::Exp, a); }
Tensor log2(const Tensor& a) { return elementwise(OpKind::Log2, a); }
Tensor relu(const Tensor& a) { return elementwise(OpKind::Relu, a); }

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  auto A = a.raw();
  auto O = out.raw();
  for (size_t i = 0; i < A.size(); ++i) O[i] = A[i] * s;
  flop_counter() += static_cast<uint64_t>(A.size());
  record_op(out, {a}, [a, s](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad_raw();
    auto GA = ta.grad_raw_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * s;
  });
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  auto A = a.raw();
  auto O = out.raw();
  const size_t step = elem_size(a);
  for (size_t i = 0; i < A.size(); ++i) O[i] = A[i] + (i % step == 0 ? s : 0.0);
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad_raw();
    auto GA = ta.grad_raw_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
  });
  return out;
}

Tensor to_complex(const Tensor& a) {
  if (a.is_complex()) return a;
  Tensor out = Tensor::zeros(a.shape(), DType::Complex128);
  auto A = a.values();
  auto O = out.cvalues();
  for (size_t i = 0; i < A.size(); ++i) O[i] = cplx(A[i], 0.0);
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    auto G = o.cgrad();
    auto GA = ta.grad_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i].real();
  });
  return out;
}

Tensor real_part(const Tensor& a) {
  if (!a.is_complex()) return a;
  Tensor out = Tensor::zeros(a.shape());
  auto A = a.cvalues();
  auto O = out.values();
  for (size_t i = 0; i < A.size(); ++i) O[i] = A[i].real();
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad();
    auto GA = ta.cgrad_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += cplx(G[i], 0.0);
  });
  return out;
}

Tensor imag_part(const Tensor& a) {
  if (!a.is_complex()) return Tensor::zeros(a.shape());
  Tensor out = Tensor::zeros(a.shape());
  auto A = a.cvalues();
  auto O = out.values();
  for (size_t i = 0; i < A.size(); ++i) O[i] = A[i].imag();
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad();
    auto GA = ta.cgrad_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += cplx(0.0, G[i]);
  });
  return out;
}

Tensor conj(const Tensor& a) {
  if (!a.is_complex()) return a;
  Tensor out = Tensor::zeros(a.shape(), DType::Complex128);
  auto A = a.cvalues();
  auto O = out.cvalues();
  for (size_t i = 0; i < A.size(); ++i) O[i] = std::conj(A[i]);
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    auto G = o.cgrad();
    auto GA = ta.cgrad_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += std::conj(G[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  require_real(a, "sum");
  auto A = a.values();
  Tensor out = Tensor::scalar(std::accumulate(A.begin(), A.end(), 0.0));
  flop_counter() += static_cast<uint64_t>(A.size());
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    const double g = o.grad()[0];
    for (double& v : ta.grad_mut()) v += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  const int64_t n = a.numel();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

namespace {
template <class T>
Tensor sum_axis_impl(const Tensor& a, int axis) {
  const AxisView v = axis_view(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + axis);
  Tensor out = Tensor::zeros(out_shape, dtype_of<T>());
  auto A = elems<T>(a);
  auto O = elems_mut<T>(out);
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t l = 0; l < v.len; ++l) {
      const T* src = A.data() + (o * v.len + l) * v.inner;
      T* dst = O.data() + o * v.inner;
      for (int64_t i = 0; i < v.inner; ++i) dst[i] += src[i];
    }
  }
  record_op(out, {a}, [a, v](const Tensor& o) {
    Tensor ta = a;
    auto G = grads<T>(o);
    auto GA = grads_mut<T>(ta);
    for (int64_t oi = 0; oi < v.outer; ++oi) {
      for (int64_t l = 0; l < v.len; ++l) {
        T* dst = GA.data() + (oi * v.len + l) * v.inner;
        const T* src = G.data() + oi * v.inner;
        for (int64_t i = 0; i < v.inner; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}
}  // namespace

Tensor sum_axis(const Tensor& a, int axis) {
  const int ax = normalize_axis(axis, a.rank());
  return a.is_complex() ? sum_axis_impl<cplx>(a, ax) : sum_axis_impl<double>(a, ax);
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = a.dtype();
  impl->data.assign(a.raw().begin(), a.raw().end());
  Tensor out(std::move(impl));
  record_op(out, {a}, [a](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad_raw();
    auto GA = ta.grad_raw_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
  });
  return out;
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) throw DimensionError("permute: wrong permutation rank");
  std::vector<int> p(perm.size());
  std::vector<bool> seen(perm.size(), false);
  for (size_t i = 0; i < perm.size(); ++i) {
    p[i] = normalize_axis(perm[i], r);
    if (seen[static_cast<size_t>(p[i])]) throw DimensionError("permute: repeated axis");
    seen[static_cast<size_t>(p[i])] = true;
  }
  Shape out_shape(perm.size());
  for (size_t i = 0; i < p.size(); ++i) out_shape[i] = a.shape()[static_cast<size_t>(p[i])];
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  const size_t es = elem_size(a);
  {
    const double* A = a.raw().data();
    double* O = out.raw().data();
    for_each_permuted(a.shape(), p, [&](int64_t oi, int64_t ii) {
      for (size_t c = 0; c < es; ++c) O[oi * es + c] = A[ii * es + c];
    });
  }
  record_op(out, {a}, [a, p, es](const Tensor& o) {
    Tensor ta = a;
    const double* Gd = o.grad_raw().data();
    double* GA = ta.grad_raw_mut().data();
    for_each_permuted(a.shape(), p, [&](int64_t oi, int64_t ii) {
      for (size_t c = 0; c < es; ++c) GA[ii * es + c] += Gd[oi * es + c];
    });
  });
  return out;
}

Tensor transpose(const Tensor& a, int axis1, int axis2) {
  const int r = a.rank();
  std::vector<int> perm(static_cast<size_t>(r));
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[static_cast<size_t>(normalize_axis(axis1, r))],
            perm[static_cast<size_t>(normalize_axis(axis2, r))]);
  return permute(a, perm);
}

Tensor slice_axis(const Tensor& a, int axis, int64_t start, int64_t length) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisView v = axis_view(a.shape(), ax);
  if (start < 0 || length < 0 || start + length > v.len) {
    throw DimensionError("slice_axis: [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside extent " +
                         std::to_string(v.len));
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(ax)] = length;
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  const auto es = static_cast<int64_t>(elem_size(a));
  const int64_t block = v.inner * es;
  {
    const double* A = a.raw().data();
    double* O = out.raw().data();
    for (int64_t o = 0; o < v.outer; ++o) {
      std::copy_n(A + (o * v.len + start) * block, length * block, O + o * length * block);
    }
  }
  record_op(out, {a}, [a, v, start, length, block](const Tensor& o) {
    Tensor ta = a;
    const double* Gd = o.grad_raw().data();
    double* GA = ta.grad_raw_mut().data();
    for (int64_t oi = 0; oi < v.outer; ++oi) {
      double* dst = GA + (oi * v.len + start) * block;
      const double* src = Gd + oi * length * block;
      for (int64_t i = 0; i < length * block; ++i) dst[i] += src[i];
    }
  });
  return out;
}

Tensor pad_axis(const Tensor& a, int axis, int64_t before, int64_t after) {
  const int ax = normalize_axis(axis, a.rank());
  if (before < 0 || after < 0) throw DimensionError("pad_axis: negative padding");
  const AxisView v = axis_view(a.shape(), ax);
  const int64_t len = v.len + before + after;
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(ax)] = len;
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  const auto es = static_cast<int64_t>(elem_size(a));
  const int64_t block = v.inner * es;
  {
    const double* A = a.raw().data();
    double* O = out.raw().data();
    for (int64_t o = 0; o < v.outer; ++o) {
      std::copy_n(A + o * v.len * block, v.len * block, O + (o * len + before) * block);
    }
  }
  record_op(out, {a}, [a, v, len, before, block](const Tensor& o) {
    Tensor ta = a;
    const double* Gd = o.grad_raw().data();
    double* GA = ta.grad_raw_mut().data();
    for (int64_t oi = 0; oi < v.outer; ++oi) {
      const double* src = Gd + (oi * len + before) * block;
      double* dst = GA + oi * v.len * block;
      for (int64_t i = 0; i < v.len * block; ++i) dst[i] += src[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, false); }
Tensor matmul_bt(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, true); }

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

Tensor softmax_lastdim(const Tensor& a, const Tensor& mask, int64_t* fully_masked_rows) {
  require_real(a, "softmax_lastdim");
  if (a.rank() < 1) throw DimensionError("softmax_lastdim: scalar input");
  const int64_t n = a.dim(-1);
  const int64_t rows = n == 0 ? 0 : a.numel() / n;
  int64_t mask_len = 0;
  if (mask.defined()) {
    require_real(mask, "softmax_lastdim mask");
    const Shape& ms = mask.shape();
    const Shape& as = a.shape();
    if (ms.size() > as.size() || !std::equal(ms.rbegin(), ms.rend(), as.rbegin())) {
      throw DimensionError("softmax_lastdim: mask " + shape_str(ms) +
                           " does not match trailing extents of " + shape_str(as));
    }
    mask_len = mask.numel();
  }
  Tensor out = Tensor::zeros(a.shape());
  auto A = a.values();
  auto O = out.values();
  std::span<const double> Mv = mask.defined() ? mask.values() : std::span<const double>{};
  int64_t masked = 0;
  std::vector<double> row(static_cast<size_t>(n));
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t base = r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < n; ++j) {
      double v = A[base + j];
      if (mask_len) v += Mv[(base + j) % mask_len];
      row[static_cast<size_t>(j)] = v;
      mx = std::max(mx, v);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      ++masked;
      continue;
    }
    double total = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double e = std::exp(row[static_cast<size_t>(j)] - mx);
      O[base + j] = e;
      total += e;
    }
    for (int64_t j = 0; j < n; ++j) O[base + j] /= total;
  }
  if (fully_masked_rows) *fully_masked_rows += masked;
  flop_counter() += static_cast<uint64_t>(5 * rows * n);
  record_op(out, {a}, [a, n, rows](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad();
    auto Y = o.values();
    auto GA = ta.grad_mut();
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t base = r * n;
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += G[base + j] * Y[base + j];
      for (int64_t j = 0; j < n; ++j) GA[base + j] += Y[base + j] * (G[base + j] - dot);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// FFT
// ---------------------------------------------------------------------------

bool is_power_of_two(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

int64_t next_power_of_two(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {
Tensor dft_lastdim(const Tensor& input, bool inverse) {
  if (input.rank() < 1) throw DimensionError("fft: scalar input");
  const int64_t n = input.dim(-1);
  if (!is_power_of_two(n)) {
    throw ConfigError("fft: transform length " + std::to_string(n) + " is not a power of two");
  }
  Tensor a = to_complex(input);
  const int64_t rows = a.numel() / n;
  Tensor out = Tensor::zeros(a.shape(), DType::Complex128);
  detail::dft_rows(a.cvalues().data(), out.cvalues().data(), rows, n, inverse ? +1 : -1);
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n);
    for (cplx& v : out.cvalues()) v *= s;
  }
  record_op(out, {a}, [a, n, rows, inverse](const Tensor& o) {
    Tensor ta = a;
    auto G = o.cgrad();
    std::vector<cplx> tmp(G.size());
    // Adjoint of the forward DFT is the unscaled backward DFT, and vice versa.
    detail::dft_rows(G.data(), tmp.data(), rows, n, inverse ? -1 : +1);
    const double s = inverse ? 1.0 / static_cast<double>(n) : 1.0;
    auto GA = ta.cgrad_mut();
    for (size_t i = 0; i < tmp.size(); ++i) GA[i] += tmp[i] * s;
  });
  return out;
}
}  // namespace

Tensor fft_lastdim(const Tensor& a) { return dft_lastdim(a, false); }
Tensor ifft_lastdim(const Tensor& a) { return dft_lastdim(a, true); }

// ---------------------------------------------------------------------------
// Pooling, normalization, lookup, loss
// ---------------------------------------------------------------------------

Tensor adaptive_maxpool_time(const Tensor& a, int64_t out_len) {
  require_real(a, "adaptive_maxpool_time");
  if (a.rank() < 1) throw DimensionError("adaptive_maxpool_time: scalar input");
  const int64_t t = a.dim(-1);
  if (out_len < 1 || out_len > t) {
    throw DimensionError("adaptive_maxpool_time: output length " + std::to_string(out_len) +
                         " not in [1, " + std::to_string(t) + "]");
  }
  const int64_t rows = a.numel() / t;
  Shape out_shape = a.shape();
  out_shape.back() = out_len;
  Tensor out = Tensor::zeros(out_shape);
  auto A = a.values();
  auto O = out.values();
  std::vector<int64_t> argmax(static_cast<size_t>(rows * out_len));
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t i = 0; i < out_len; ++i) {
      const int64_t lo = i * t / out_len;
      const int64_t hi = (i + 1) * t / out_len;
      int64_t best = lo;
      for (int64_t j = lo + 1; j < hi; ++j) {
        if (A[r * t + j] > A[r * t + best]) best = j;
      }
      O[r * out_len + i] = A[r * t + best];
      argmax[static_cast<size_t>(r * out_len + i)] = r * t + best;
    }
  }
  record_op(out, {a}, [a, argmax = std::move(argmax)](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad();
    auto GA = ta.grad_mut();
    for (size_t i = 0; i < G.size(); ++i) GA[static_cast<size_t>(argmax[i])] += G[i];
  });
  return out;
}

Tensor layer_norm_lastdim(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_real(x, "layer_norm");
  const int64_t d = x.dim(-1);
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  const int64_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape());
  auto X = x.values();
  auto Gn = gain.values();
  auto Bs = bias.values();
  auto O = out.values();
  std::vector<double> xhat(X.size());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = X.data() + r * d;
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mu) * is;
      xhat[static_cast<size_t>(r * d + j)] = xh;
      O[r * d + j] = xh * Gn[j] + Bs[j];
    }
  }
  flop_counter() += static_cast<uint64_t>(8 * X.size());
  record_op(out, {x, gain, bias},
            [x, gain, bias, d, rows, xhat = std::move(xhat),
             inv_std = std::move(inv_std)](const Tensor& o) {
              Tensor tx = x, tg = gain, tb = bias;
              auto G = o.grad();
              auto Gn = gain.values();
              if (tg.requires_grad() || tb.requires_grad()) {
                std::span<double> GG = tg.requires_grad() ? tg.grad_mut() : std::span<double>{};
                std::span<double> GB = tb.requires_grad() ? tb.grad_mut() : std::span<double>{};
                for (int64_t r = 0; r < rows; ++r) {
                  for (int64_t j = 0; j < d; ++j) {
                    const auto i = static_cast<size_t>(r * d + j);
                    if (!GG.empty()) GG[static_cast<size_t>(j)] += G[i] * xhat[i];
                    if (!GB.empty()) GB[static_cast<size_t>(j)] += G[i];
                  }
                }
              }
              if (tx.requires_grad()) {
                auto GX = tx.grad_mut();
                const double inv_d = 1.0 / static_cast<double>(d);
                for (int64_t r = 0; r < rows; ++r) {
                  double m1 = 0.0, m2 = 0.0;
                  for (int64_t j = 0; j < d; ++j) {
                    const auto i = static_cast<size_t>(r * d + j);
                    const double dxh = G[i] * Gn[j];
                    m1 += dxh;
                    m2 += dxh * xhat[i];
                  }
                  m1 *= inv_d;
                  m2 *= inv_d;
                  const double is = inv_std[static_cast<size_t>(r)];
                  for (int64_t j = 0; j < d; ++j) {
                    const auto i = static_cast<size_t>(r * d + j);
                    GX[i] += is * (G[i] * Gn[j] - m1 - xhat[i] * m2);
                  }
                }
              }
            });
  return out;
}

Tensor embedding(const Tensor& table, std::span<const int64_t> ids, const Shape& ids_shape) {
  require_real(table, "embedding");
  if (table.rank() != 2) throw DimensionError("embedding: table must be (V, D)");
  if (shape_numel(ids_shape) != static_cast<int64_t>(ids.size())) {
    throw DimensionError("embedding: id count does not match id shape");
  }
  const int64_t vocab = table.dim(0);
  const int64_t d = table.dim(1);
  for (int64_t id : ids) {
    if (id < 0 || id >= vocab) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
  }
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  Tensor out = Tensor::zeros(out_shape);
  auto T = table.values();
  auto O = out.values();
  for (size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(T.data() + ids[i] * d, d, O.data() + static_cast<int64_t>(i) * d);
  }
  std::vector<int64_t> saved(ids.begin(), ids.end());
  record_op(out, {table}, [table, d, saved = std::move(saved)](const Tensor& o) {
    Tensor tt = table;
    auto G = o.grad();
    auto GT = tt.grad_mut();
    for (size_t i = 0; i < saved.size(); ++i) {
      for (int64_t j = 0; j < d; ++j) {
        GT[static_cast<size_t>(saved[i] * d + j)] += G[static_cast<size_t>(static_cast<int64_t>(i) * d + j)];
      }
    }
  });
  return out;
}

Tensor gather_positions(const Tensor& a, std::span<const int64_t> positions) {
  require_real(a, "gather_positions");
  if (a.rank() != 3) throw DimensionError("gather_positions: input must be (B, L, X)");
  const int64_t b = a.dim(0), l = a.dim(1), x = a.dim(2);
  if (static_cast<int64_t>(positions.size()) != b) {
    throw DimensionError("gather_positions: need one position per batch row");
  }
  Tensor out = Tensor::zeros({b, x});
  auto A = a.values();
  auto O = out.values();
  for (int64_t i = 0; i < b; ++i) {
    const int64_t p = positions[static_cast<size_t>(i)];
    if (p < 0 || p >= l) throw DimensionError("gather_positions: position out of range");
    std::copy_n(A.data() + (i * l + p) * x, x, O.data() + i * x);
  }
  std::vector<int64_t> saved(positions.begin(), positions.end());
  record_op(out, {a}, [a, l, x, saved = std::move(saved)](const Tensor& o) {
    Tensor ta = a;
    auto G = o.grad();
    auto GA = ta.grad_mut();
    for (size_t i = 0; i < saved.size(); ++i) {
      const int64_t bi = static_cast<int64_t>(i);
      for (int64_t j = 0; j < x; ++j) {
        GA[static_cast<size_t>((bi * l + saved[i]) * x + j)] += G[static_cast<size_t>(bi * x + j)];
      }
    }
  });
  return out;
}

Tensor index_select(const Tensor& a, int axis, std::span<const int64_t> indices) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisView v = axis_view(a.shape(), ax);
  const auto n = static_cast<int64_t>(indices.size());
  for (int64_t i : indices) {
    if (i < 0 || i >= v.len) throw DimensionError("index_select: index " + std::to_string(i) + " out of range");
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(ax)] = n;
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  const auto block = v.inner * static_cast<int64_t>(elem_size(a));
  {
    const double* A = a.raw().data();
    double* O = out.raw().data();
    for (int64_t o = 0; o < v.outer; ++o) {
      for (int64_t j = 0; j < n; ++j) {
        std::copy_n(A + (o * v.len + indices[static_cast<size_t>(j)]) * block, block, O + (o * n + j) * block);
      }
    }
  }
  std::vector<int64_t> saved(indices.begin(), indices.end());
  record_op(out, {a}, [a, v, block, saved = std::move(saved)](const Tensor& o) {
    Tensor ta = a;
    const double* Gd = o.grad_raw().data();
    double* GA = ta.grad_raw_mut().data();
    const auto n = static_cast<int64_t>(saved.size());
    for (int64_t oi = 0; oi < v.outer; ++oi) {
      for (int64_t j = 0; j < n; ++j) {
        double* dst = GA + (oi * v.len + saved[static_cast<size_t>(j)]) * block;
        const double* src = Gd + (oi * n + j) * block;
        for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int64_t> targets) {
  require_real(logits, "cross_entropy");
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be (N, V)");
  const int64_t n = logits.dim(0), v = logits.dim(1);
  if (static_cast<int64_t>(targets.size()) != n) {
    throw DimensionError("cross_entropy: need one target per row");
  }
  auto Z = logits.values();
  std::vector<double> probs(Z.size());
  double total = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    const int64_t t = targets[static_cast<size_t>(r)];
    if (t < 0 || t >= v) throw InputError("cross_entropy: target id out of range");
    const double* row = Z.data() + r * v;
    const double mx = *std::max_element(row, row + v);
    double s = 0.0;
    for (int64_t j = 0; j < v; ++j) {
      const double e = std::exp(row[j] - mx);
      probs[static_cast<size_t>(r * v + j)] = e;
      s += e;
    }
    for (int64_t j = 0; j < v; ++j) probs[static_cast<size_t>(r * v + j)] /= s;
    total += -(row[t] - mx - std::log(s));
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  std::vector<int64_t> saved(targets.begin(), targets.end());
  record_op(out, {logits},
            [logits, n, v, probs = std::move(probs), saved = std::move(saved)](const Tensor& o) {
              Tensor tl = logits;
              const double g = o.grad()[0] / static_cast<double>(n);
              auto GL = tl.grad_mut();
              for (int64_t r = 0; r < n; ++r) {
                for (int64_t j = 0; j < v; ++j) {
                  const auto i = static_cast<size_t>(r * v + j);
                  GL[i] += g * (probs[i] - (j == saved[static_cast<size_t>(r)] ? 1.0 : 0.0));
                }
              }
            });
  return out;
}

}  // namespace focus
