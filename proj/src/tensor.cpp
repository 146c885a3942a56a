#include "synergy/tensor.hpp"

#include <atomic>
#include <sstream>

#include "synergy/errors.hpp"

namespace synergy {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
}

}  // namespace

Tensor::Tensor() : Tensor(Shape{1}) {}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  check_shape(shape);
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  check_shape(shape);
  if (shape_numel(shape) != data.size())
    throw ShapeError("shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() needs a matrix, got " + shape_to_string(shape()));
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() needs a matrix, got " + shape_to_string(shape()));
  return impl_->shape[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single element, got " + shape_to_string(shape()));
  return impl_->data[0];
}

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, impl_->data, impl_->requires_grad);
  t.impl_->grad = impl_->grad;
  return t;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::MatMul: return "matmul";
    case OpKind::MatVec: return "matvec";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::AddColBroadcast: return "add_col_broadcast";
    case OpKind::MulColBroadcast: return "mul_col_broadcast";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::LogSumExp: return "logsumexp";
    case OpKind::Sum: return "sum";
    case OpKind::Dot: return "dot";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::StackColumns: return "stack_columns";
    case OpKind::Column: return "column";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::Row: return "row";
    case OpKind::FoldSum: return "fold_sum";
    case OpKind::PowerL2Norm: return "normalize_power_l2";
  }
  return "unknown";
}

namespace {

thread_local Graph* tls_current = nullptr;
std::atomic<std::uint64_t> next_graph_id{1};

}  // namespace

Graph::Graph() : id_(next_graph_id.fetch_add(1)), previous_(tls_current) { tls_current = this; }

Graph::~Graph() { tls_current = previous_; }

Graph* Graph::current() { return tls_current; }

void Graph::record(OpKind kind, std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
                   Tensor& output, std::function<void()> backward) {
  auto& impl = *output.impl();
  impl.requires_grad = true;
  impl.graph_id = id_;
  impl.node = nodes_.size();
  nodes_.push_back(GraphNode{kind, std::move(inputs), output.impl(), std::move(backward)});
}

void Graph::backward(const Tensor& output) {
  if (output.numel() != 1)
    throw ShapeError("backward needs a scalar output, got " + shape_to_string(output.shape()));

  for (auto& node : nodes_) {
    for (auto& in : node.inputs)
      if (in->requires_grad && in->graph_id == 0 && in->grad.empty())
        in->grad.assign(in->data.size(), 0.0);
  }

  auto& out = *output.impl();
  if (!out.requires_grad) return;
  if (out.graph_id == 0) {
    if (out.grad.empty()) out.grad.assign(1, 0.0);
    out.grad[0] += 1.0;
    return;
  }
  if (out.graph_id != id_ || out.node >= nodes_.size() || nodes_[out.node].output != output.impl())
    throw ShapeError("backward output was not recorded in this graph");

  for (std::size_t i = 0; i <= out.node; ++i) nodes_[i].output->grad.clear();
  out.grad.assign(1, 1.0);

  for (std::size_t i = out.node + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.output->grad.empty()) continue;
    for (auto& in : node.inputs)
      if (in->requires_grad && in->grad.empty()) in->grad.assign(in->data.size(), 0.0);
    node.backward();
  }
}

}  // namespace synergy
