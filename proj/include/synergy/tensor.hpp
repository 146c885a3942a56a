#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synergy {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until a backward pass reaches this tensor.
  std::vector<double> grad;
  bool requires_grad = false;
  // Producer graph (0 for leaves and untracked values) and node index within it.
  std::uint64_t graph_id = 0;
  std::size_t node = 0;
};

}  // namespace detail

// Dense row-major float64 array with an optional gradient buffer.
//
// Tensor is a handle: copies share storage, the same way parameters are shared
// between the modules that read them. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient buffer; empty span when no backward pass has reached this tensor.
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  bool is_leaf() const { return impl_->graph_id == 0; }

  Tensor clone() const;
  // Untracked copy of the values; never requires grad.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

enum class OpKind {
  MatMul,
  MatVec,
  Transpose,
  Add,
  Sub,
  Mul,
  AddColBroadcast,
  MulColBroadcast,
  Scale,
  AddScalar,
  Tanh,
  Sigmoid,
  Softmax,
  LogSoftmax,
  LogSumExp,
  Sum,
  Dot,
  Concat,
  Slice,
  StackColumns,
  Column,
  GatherRows,
  Row,
  FoldSum,
  PowerL2Norm,
};

std::string_view op_name(OpKind kind);

struct GraphNode {
  OpKind kind;
  std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
  std::shared_ptr<detail::TensorImpl> output;
  std::function<void()> backward;
};

// Tape of recorded operations.
//
// Constructing a Graph makes it the recording target for the current thread
// until it is destroyed; graphs nest. Operations only record when at least one
// input requires grad, so evaluation outside a Graph allocates no tape.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }
  const GraphNode& node(std::size_t i) const { return nodes_.at(i); }

  // Reverse-mode pass from a scalar output. Leaf gradients accumulate (+=);
  // every leaf recorded in this graph ends with a gradient buffer, zero if the
  // output does not depend on it.
  void backward(const Tensor& output);

  static Graph* current();

  void record(OpKind kind, std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              Tensor& output, std::function<void()> backward);

 private:
  std::uint64_t id_;
  Graph* previous_;
  std::vector<GraphNode> nodes_;
};

}  // namespace synergy
