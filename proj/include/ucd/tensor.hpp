#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle: copies share storage, the way framework tensors
// do. Use clone() for a deep copy and detach() for a graph-free copy. Ops
// record a node whenever grad mode is on and at least one input requires a
// gradient; the recorded graph lives exactly as long as the tensors that
// reference it, so each training step builds a fresh tape.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ucd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  leaky_relu,
  tanh,
  sigmoid,
  softplus,
  softmax,
  log,
  exp,
  sum,
  sum_last,
  mean,
  stack,
  slice,
  concat_last,
  repeat_last,
  log_sum_exp,
};

const char* op_name(OpKind kind);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
  OpKind op = OpKind::leaf;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  double* grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  // Rank-0 scalar holding 0.
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  // Writable view. Only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad();
  void clear_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node_->op == OpKind::leaf; }
  OpKind op() const { return node_->op; }
  std::uint64_t id() const { return node_->id; }

  double item() const;
  double operator[](std::size_t flat) const { return node_->data[flat]; }
  double at(std::size_t row, std::size_t col) const;

  Tensor detach() const;
  Tensor clone() const;
  bool shares_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Thread-local grad mode. While a guard is alive no op records a node.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Recorded computation reachable from a root, in topological order (inputs
// before consumers). Node ids grow monotonically, so sorting by id is a valid
// topological order of any DAG the ops can build.
class Graph {
 public:
  static Graph collect(const Tensor& root);

  std::span<detail::Node* const> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<detail::Node*> nodes_;
};

// Populates .grad of every requires_grad leaf with d(root)/d(leaf).
// Leaf gradients accumulate across calls; interior gradients are reset.
void backward(const Tensor& root);

// --- ops -------------------------------------------------------------------

// [n, k] x [k, m] -> [n, m]
Tensor matmul(const Tensor& a, const Tensor& b);
// Same shape, b of size 1, or rank-1 b matching the last dim of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// Same shape or b of size 1.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor leaky_relu(const Tensor& a, double negative_slope);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// log(1 + e^x), overflow-free.
Tensor softplus(const Tensor& a);
// Softmax over the last dim, max-subtracted.
Tensor softmax(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
// Full reduction to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// [..., n] -> [...]
Tensor sum_last(const Tensor& a);
// Max-shifted log-sum-exp over the last dim: [..., n] -> [...].
Tensor log_sum_exp(const Tensor& a);
// Stacks equal-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
// Rows [begin, end) of the leading axis.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
// [n, p] ++ [n, q] -> [n, p + q]
Tensor concat_last(const Tensor& a, const Tensor& b);
// [...] -> [..., count], each value repeated along a new last axis.
Tensor repeat_last(const Tensor& a, std::size_t count);

struct OpAttributes {
  double negative_slope = 0.2;
  double factor = 1.0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t count = 1;
};

// Uniform entry point over every op kind, used by generic gradient sweeps.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttributes& attrs = {});

}  // namespace ucd
