#include "focus/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace focus {

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local uint64_t g_flops = 0;

size_t doubles_per_element(DType dtype) { return dtype == DType::Complex128 ? 2 : 1; }
}  // namespace

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, DType dtype) {
  auto impl = std::make_shared<TensorImpl>();
  const int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->data.assign(static_cast<size_t>(n) * doubles_per_element(dtype), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
    throw DimensionError("from_vector: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_complex(Shape shape, const std::vector<cplx>& values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
    throw DimensionError("from_complex: value count does not fill shape " + shape_str(shape));
  }
  Tensor t = zeros(std::move(shape), DType::Complex128);
  std::copy(values.begin(), values.end(), t.cvalues().begin());
  return t;
}

Tensor Tensor::scalar(double value) { return from_vector({}, {value}); }

TensorImpl& Tensor::checked() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

int64_t Tensor::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape()));
  }
  return shape()[static_cast<size_t>(a)];
}

int64_t Tensor::numel() const { return shape_numel(shape()); }
DType Tensor::dtype() const { return checked().dtype; }

std::span<double> Tensor::values() {
  if (is_complex()) throw ContractError("values(): tensor is complex");
  return checked().data;
}
std::span<const double> Tensor::values() const {
  if (is_complex()) throw ContractError("values(): tensor is complex");
  return checked().data;
}
std::span<cplx> Tensor::cvalues() {
  if (!is_complex()) throw ContractError("cvalues(): tensor is real");
  auto& d = checked().data;
  return {reinterpret_cast<cplx*>(d.data()), d.size() / 2};
}
std::span<const cplx> Tensor::cvalues() const {
  if (!is_complex()) throw ContractError("cvalues(): tensor is real");
  const auto& d = checked().data;
  return {reinterpret_cast<const cplx*>(d.data()), d.size() / 2};
}
std::span<double> Tensor::raw() { return checked().data; }
std::span<const double> Tensor::raw() const { return checked().data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements");
  return values()[0];
}

namespace {
int64_t flat_index(const Shape& shape, std::initializer_list<int64_t> index) {
  if (index.size() != shape.size()) throw DimensionError("index rank does not match tensor rank");
  int64_t flat = 0;
  size_t i = 0;
  for (int64_t v : index) {
    if (v < 0 || v >= shape[i]) throw DimensionError("index out of range");
    flat = flat * shape[i] + v;
    ++i;
  }
  return flat;
}
}  // namespace

double Tensor::at(std::initializer_list<int64_t> index) const {
  return values()[static_cast<size_t>(flat_index(shape(), index))];
}
cplx Tensor::cat(std::initializer_list<int64_t> index) const {
  return cvalues()[static_cast<size_t>(flat_index(shape(), index))];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
Tensor& Tensor::set_requires_grad(bool on) {
  checked().requires_grad = on;
  return *this;
}
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (is_complex()) throw ContractError("grad(): tensor is complex");
  return checked().grad;
}
std::span<const cplx> Tensor::cgrad() const {
  if (!is_complex()) throw ContractError("cgrad(): tensor is real");
  const auto& g = checked().grad;
  return {reinterpret_cast<const cplx*>(g.data()), g.size() / 2};
}
std::span<const double> Tensor::grad_raw() const { return checked().grad; }
std::span<double> Tensor::grad_raw_mut() {
  auto& impl = checked();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}
std::span<cplx> Tensor::cgrad_mut() {
  if (!is_complex()) throw ContractError("cgrad_mut(): tensor is real");
  auto g = grad_raw_mut();
  return {reinterpret_cast<cplx*>(g.data()), g.size() / 2};
}
std::span<double> Tensor::grad_mut() {
  if (is_complex()) throw ContractError("grad_mut(): tensor is complex");
  return grad_raw_mut();
}
void Tensor::zero_grad() {
  auto& impl = checked();
  std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
}

Tensor Tensor::grad_tensor() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape();
  impl->dtype = dtype();
  impl->data = has_grad() ? impl_->grad : std::vector<double>(impl_->data.size(), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape();
  impl->dtype = dtype();
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

void Tape::record(const Tensor& out, std::vector<Tensor> inputs, BackwardFn fn) {
  nodes_.push_back(Node{out, std::move(inputs), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1 || loss.is_complex()) {
    throw ContractError("backward() needs a real scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward(): loss is not connected to any differentiable leaf");
  }
  Tensor seed = loss;
  seed.grad_mut()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->out.has_grad()) continue;
    for (Tensor& in : it->inputs) {
      if (in.requires_grad()) in.grad_raw_mut();
    }
    it->fn(it->out);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
  if (!g_active_tape) throw ContractError("backward(): no active tape");
  g_active_tape->backward(loss);
}

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_active_tape) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t && t->requires_grad(); });
}

void record_op(Tensor& out, std::vector<Tensor> inputs, Tape::BackwardFn fn) {
  if (!g_active_tape) return;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return;
  out.set_requires_grad(true);
  g_active_tape->record(out, std::move(inputs), std::move(fn));
}

uint64_t& flop_counter() { return g_flops; }

}  // namespace focus
