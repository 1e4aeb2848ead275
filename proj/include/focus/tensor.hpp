#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace focus {

using cplx = std::complex<double>;
using Shape = std::vector<int64_t>;

// Error hierarchy. The CLI maps these onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DimensionError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class ContractError : public Error {
 public:
  using Error::Error;
};
class InputError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};
class DivergenceError : public Error {
 public:
  using Error::Error;
};

enum class DType : uint8_t { Real64 = 0, Complex128 = 1 };

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Storage behind a Tensor. Complex values are stored interleaved (re, im),
/// which is layout-compatible with std::complex<double>.
struct TensorImpl {
  Shape shape;
  DType dtype = DType::Real64;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
};

/// Dense row-major real64 or complex128 array. A Tensor is a shared handle:
/// copies alias the same storage. Values are treated as immutable once an
/// operation has consumed them; only gradients accumulate in place.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, DType dtype = DType::Real64);
  static Tensor full(Shape shape, double value);
  static Tensor from_vector(Shape shape, std::vector<double> values);
  static Tensor from_complex(Shape shape, const std::vector<cplx>& values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  // Negative axes count from the end.
  int64_t dim(int axis) const;
  int64_t numel() const;
  DType dtype() const;
  bool is_complex() const { return dtype() == DType::Complex128; }

  std::span<double> values();
  std::span<const double> values() const;
  std::span<cplx> cvalues();
  std::span<const cplx> cvalues() const;
  // Raw doubles irrespective of dtype (2 per complex element).
  std::span<double> raw();
  std::span<const double> raw() const;

  double item() const;
  double at(std::initializer_list<int64_t> index) const;
  cplx cat(std::initializer_list<int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<const cplx> cgrad() const;
  // Gradient doubles irrespective of dtype; empty when no gradient exists.
  std::span<const double> grad_raw() const;
  // Allocates a zero gradient on first use.
  std::span<double> grad_raw_mut();
  std::span<cplx> cgrad_mut();
  std::span<double> grad_mut();
  void zero_grad();
  Tensor grad_tensor() const;

  // Fresh storage, no tape history, requires_grad cleared.
  Tensor detach() const;

  TensorImpl* impl() const { return impl_.get(); }
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  TensorImpl& checked() const;
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of differentiable operations. Nodes are appended as
/// operations execute, so reverse order is a valid topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out)>;

  void record(const Tensor& out, std::vector<Tensor> inputs, BackwardFn fn);
  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Every input
  // that requires a gradient and feeds a visited node gets a populated grad.
  void backward(const Tensor& loss);
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor out;
    std::vector<Tensor> inputs;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
};

/// Installs a tape as the calling thread's active tape for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Runs the active tape backward from `loss`.
void backward(const Tensor& loss);

// True when an operation on these inputs must be recorded.
bool needs_grad(std::initializer_list<const Tensor*> inputs);

// Marks `out` as differentiable and records its backward rule on the active
// tape, provided any input requires a gradient.
void record_op(Tensor& out, std::vector<Tensor> inputs, Tape::BackwardFn fn);

// Floating point operation counter for the calling thread. Matmul, FFT and
// elementwise kernels add their nominal cost here.
uint64_t& flop_counter();

}  // namespace focus
