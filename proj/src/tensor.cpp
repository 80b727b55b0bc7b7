#include "ucd/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "ucd/errors.hpp"

namespace ucd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

std::uint64_t next_id() { return g_next_id.fetch_add(1, std::memory_order_relaxed); }

using NodePtr = std::shared_ptr<detail::Node>;
using BackwardFn = std::function<void(detail::Node&)>;

Tensor record(OpKind op, Shape shape, std::vector<double> data, std::vector<NodePtr> inputs,
              BackwardFn backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->id = next_id();
  const bool track = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& n) {
                       return n->requires_grad;
                     });
  if (track) {
    node->op = op;
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

[[noreturn]] void dimension_error(OpKind op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " and " +
                       shape_str(b));
}

[[noreturn]] void dimension_error(OpKind op, const Shape& a, const std::string& what) {
  throw DimensionError(std::string(op_name(op)) + ": " + what + ", got " + shape_str(a));
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

Shape drop_last(const Shape& s) { return s.empty() ? Shape{} : Shape(s.begin(), s.end() - 1); }

// deriv(x, y) is dy/dx given input x and output y.
template <typename F, typename D>
Tensor unary(OpKind op, const Tensor& a, F value_fn, D deriv) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value_fn(in[i]);
  return record(op, a.shape(), std::move(out), {a.node()}, [deriv](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer();
    for (std::size_t i = 0; i < self.data.size(); ++i) g[i] += self.grad[i] * deriv(in.data[i], self.data[i]);
  });
}

}  // namespace

double* detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad.data();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softplus: return "softplus";
    case OpKind::softmax: return "softmax";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::sum: return "sum";
    case OpKind::sum_last: return "sum_last";
    case OpKind::mean: return "mean";
    case OpKind::stack: return "stack";
    case OpKind::slice: return "slice";
    case OpKind::concat_last: return "concat_last";
    case OpKind::repeat_last: return "repeat_last";
    case OpKind::log_sum_exp: return "log_sum_exp";
  }
  return "?";
}

// --- Tensor ------------------------------------------------------------------

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor: zero-sized dimension in " + shape_str(shape));
  }
  if (data.size() != shape_size(shape)) {
    throw DimensionError("tensor: " + std::to_string(data.size()) + " values for shape " + shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  node_->id = next_id();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return shape()[axis];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("set_requires_grad: only leaves can be toggled");
  node_->requires_grad = flag;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at: expected a matrix, got " + shape_str(shape()));
  return node_->data[row * shape()[1] + col];
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

Tensor Tensor::clone() const {
  Tensor out(shape(), node_->data, node_->requires_grad && is_leaf());
  return out;
}

// --- grad mode / graph ---------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Graph Graph::collect(const Tensor& root) {
  Graph graph;
  if (!root.requires_grad()) return graph;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> pending{root.node().get()};
  seen.insert(root.node().get());
  while (!pending.empty()) {
    auto* node = pending.back();
    pending.pop_back();
    graph.nodes_.push_back(node);
    for (const auto& input : node->inputs) {
      if (input->requires_grad && seen.insert(input.get()).second) pending.push_back(input.get());
    }
  }
  std::sort(graph.nodes_.begin(), graph.nodes_.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->id < b->id; });
  return graph;
}

void backward(const Tensor& root) {
  if (root.size() != 1) throw ContractError("backward: root must be a scalar, got shape " + shape_str(root.shape()));
  const Graph graph = Graph::collect(root);
  if (graph.size() == 0) return;
  for (auto* node : graph.nodes()) {
    if (node->op != OpKind::leaf) node->grad.assign(node->data.size(), 0.0);
  }
  root.node()->grad_buffer()[0] += 1.0;
  const auto nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

// --- ops -----------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) dimension_error(OpKind::matmul, a.shape(), b.shape());
  const auto n = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto m = static_cast<Eigen::Index>(b.shape()[1]);
  std::vector<double> out(static_cast<std::size_t>(n * m));
  MutMap(out.data(), n, m).noalias() = ConstMap(a.data().data(), n, k) * ConstMap(b.data().data(), k, m);
  return record(OpKind::matmul, {a.shape()[0], b.shape()[1]}, std::move(out), {a.node(), b.node()},
                [n, k, m](detail::Node& self) {
                  auto& lhs = *self.inputs[0];
                  auto& rhs = *self.inputs[1];
                  ConstMap grad_out(self.grad.data(), n, m);
                  if (lhs.requires_grad) {
                    MutMap(lhs.grad_buffer(), n, k).noalias() += grad_out * ConstMap(rhs.data.data(), k, m).transpose();
                  }
                  if (rhs.requires_grad) {
                    MutMap(rhs.grad_buffer(), k, m).noalias() += ConstMap(lhs.data.data(), n, k).transpose() * grad_out;
                  }
                });
}

namespace {

enum class Broadcast { same, scalar, row };

Broadcast classify(OpKind op, const Tensor& a, const Tensor& b, bool allow_row) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.size() == 1) return Broadcast::scalar;
  if (allow_row && b.rank() == 1 && a.rank() >= 1 && b.shape()[0] == a.shape().back()) return Broadcast::row;
  dimension_error(op, a.shape(), b.shape());
}

Tensor add_impl(OpKind op, const Tensor& a, const Tensor& b, double sign) {
  const auto mode = classify(op, a, b, true);
  const auto ad = a.data();
  const auto bd = b.data();
  const std::size_t width = b.size();
  std::vector<double> out(a.size());
  switch (mode) {
    case Broadcast::same:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + sign * bd[i];
      break;
    case Broadcast::scalar:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + sign * bd[0];
      break;
    case Broadcast::row:
      for (std::size_t r = 0; r < out.size(); r += width) {
        for (std::size_t j = 0; j < width; ++j) out[r + j] = ad[r + j] + sign * bd[j];
      }
      break;
  }
  return record(op, a.shape(), std::move(out), {a.node(), b.node()}, [mode, sign, width](detail::Node& self) {
    auto& lhs = *self.inputs[0];
    auto& rhs = *self.inputs[1];
    const auto& g = self.grad;
    if (lhs.requires_grad) {
      double* ga = lhs.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (rhs.requires_grad) {
      double* gb = rhs.grad_buffer();
      switch (mode) {
        case Broadcast::same:
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
          break;
        case Broadcast::scalar: {
          double total = 0.0;
          for (double v : g) total += v;
          gb[0] += sign * total;
          break;
        }
        case Broadcast::row:
          for (std::size_t r = 0; r < g.size(); r += width) {
            for (std::size_t j = 0; j < width; ++j) gb[j] += sign * g[r + j];
          }
          break;
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_impl(OpKind::add, a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_impl(OpKind::sub, a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto mode = classify(OpKind::mul, a, b, false);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * (mode == Broadcast::same ? bd[i] : bd[0]);
  return record(OpKind::mul, a.shape(), std::move(out), {a.node(), b.node()}, [mode](detail::Node& self) {
    auto& lhs = *self.inputs[0];
    auto& rhs = *self.inputs[1];
    const auto& g = self.grad;
    const bool same = mode == Broadcast::same;
    if (lhs.requires_grad) {
      double* ga = lhs.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (same ? rhs.data[i] : rhs.data[0]);
    }
    if (rhs.requires_grad) {
      double* gb = rhs.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[same ? i : 0] += g[i] * lhs.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      OpKind::scale, a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      OpKind::add_scalar, a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  return unary(
      OpKind::leaky_relu, a, [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
      [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      OpKind::tanh, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tensor sigmoid(const Tensor& a) {
  return unary(OpKind::sigmoid, a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      OpKind::softplus, a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
  }
  return unary(
      OpKind::log, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      OpKind::exp, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor softmax(const Tensor& a) {
  const std::size_t width = last_dim(a.shape());
  const std::size_t rows = a.size() / width;
  const auto in = a.data();
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * width;
    double* y = out.data() + r * width;
    const double peak = *std::max_element(x, x + width);
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) total += (y[i] = std::exp(x[i] - peak));
    for (std::size_t i = 0; i < width; ++i) y[i] /= total;
  }
  return record(OpKind::softmax, a.shape(), std::move(out), {a.node()}, [rows, width](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * width;
      const double* gy = self.grad.data() + r * width;
      double dot = 0.0;
      for (std::size_t i = 0; i < width; ++i) dot += gy[i] * y[i];
      for (std::size_t i = 0; i < width; ++i) g[r * width + i] += y[i] * (gy[i] - dot);
    }
  });
}

Tensor log_sum_exp(const Tensor& a) {
  const std::size_t width = last_dim(a.shape());
  const std::size_t rows = a.size() / width;
  const auto in = a.data();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * width;
    const double peak = *std::max_element(x, x + width);
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) total += std::exp(x[i] - peak);
    out[r] = peak + std::log(total);
  }
  return record(OpKind::log_sum_exp, drop_last(a.shape()), std::move(out), {a.node()},
                [rows, width](detail::Node& self) {
                  auto& in = *self.inputs[0];
                  if (!in.requires_grad) return;
                  double* g = in.grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t i = 0; i < width; ++i) {
                      const std::size_t k = r * width + i;
                      g[k] += self.grad[r] * std::exp(in.data[k] - self.data[r]);
                    }
                  }
                });
}

Tensor sum(const Tensor& a) {
  const auto in = a.data();
  const double total = std::accumulate(in.begin(), in.end(), 0.0);
  return record(OpKind::sum, Shape{}, {total}, {a.node()}, [](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer();
    for (std::size_t i = 0; i < in.data.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const auto in = a.data();
  const double n = static_cast<double>(in.size());
  const double avg = std::accumulate(in.begin(), in.end(), 0.0) / n;
  return record(OpKind::mean, Shape{}, {avg}, {a.node()}, [n](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer();
    for (std::size_t i = 0; i < in.data.size(); ++i) g[i] += self.grad[0] / n;
  });
}

Tensor sum_last(const Tensor& a) {
  const std::size_t width = last_dim(a.shape());
  const std::size_t rows = a.size() / width;
  const auto in = a.data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < width; ++i) out[r] += in[r * width + i];
  }
  return record(OpKind::sum_last, drop_last(a.shape()), std::move(out), {a.node()}, [width](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer();
    for (std::size_t k = 0; k < in.data.size(); ++k) g[k] += self.grad[k / width];
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  const Shape& part_shape = parts[0].shape();
  std::vector<NodePtr> inputs;
  std::vector<double> out;
  out.reserve(parts.size() * parts[0].size());
  for (const auto& p : parts) {
    if (p.shape() != part_shape) dimension_error(OpKind::stack, part_shape, p.shape());
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.node());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), part_shape.begin(), part_shape.end());
  const std::size_t chunk = parts[0].size();
  return record(OpKind::stack, std::move(shape), std::move(out), std::move(inputs), [chunk](detail::Node& self) {
    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
      auto& in = *self.inputs[p];
      if (!in.requires_grad) continue;
      double* g = in.grad_buffer();
      for (std::size_t i = 0; i < chunk; ++i) g[i] += self.grad[p * chunk + i];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() == 0 || begin >= end || end > a.shape()[0]) {
    dimension_error(OpKind::slice, a.shape(),
                    "rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range");
  }
  const std::size_t row = a.size() / a.shape()[0];
  Shape shape = a.shape();
  shape[0] = end - begin;
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                          a.data().begin() + static_cast<std::ptrdiff_t>(end * row));
  const std::size_t offset = begin * row;
  return record(OpKind::slice, std::move(shape), std::move(out), {a.node()}, [offset](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer() + offset;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[0] != b.shape()[0]) {
    dimension_error(OpKind::concat_last, a.shape(), b.shape());
  }
  const std::size_t rows = a.shape()[0];
  const std::size_t p = a.shape()[1];
  const std::size_t q = b.shape()[1];
  std::vector<double> out(rows * (p + q));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(b.data().data() + r * q, q, out.data() + r * (p + q) + p);
  }
  return record(OpKind::concat_last, {rows, p + q}, std::move(out), {a.node(), b.node()},
                [rows, p, q](detail::Node& self) {
                  auto& lhs = *self.inputs[0];
                  auto& rhs = *self.inputs[1];
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* g = self.grad.data() + r * (p + q);
                    if (lhs.requires_grad) {
                      double* ga = lhs.grad_buffer() + r * p;
                      for (std::size_t i = 0; i < p; ++i) ga[i] += g[i];
                    }
                    if (rhs.requires_grad) {
                      double* gb = rhs.grad_buffer() + r * q;
                      for (std::size_t i = 0; i < q; ++i) gb[i] += g[p + i];
                    }
                  }
                });
}

Tensor repeat_last(const Tensor& a, std::size_t count) {
  if (count == 0) dimension_error(OpKind::repeat_last, a.shape(), "repeat count must be positive");
  std::vector<double> out(a.size() * count);
  for (std::size_t i = 0; i < a.size(); ++i) std::fill_n(out.data() + i * count, count, a.data()[i]);
  Shape shape = a.shape();
  shape.push_back(count);
  return record(OpKind::repeat_last, std::move(shape), std::move(out), {a.node()}, [count](detail::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    double* g = in.grad_buffer();
    for (std::size_t k = 0; k < self.grad.size(); ++k) g[k / count] += self.grad[k];
  });
}

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, const OpAttributes& attrs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ContractError(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                          std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::add: need(2); return add(inputs[0], inputs[1]);
    case OpKind::sub: need(2); return sub(inputs[0], inputs[1]);
    case OpKind::mul: need(2); return mul(inputs[0], inputs[1]);
    case OpKind::scale: need(1); return scale(inputs[0], attrs.factor);
    case OpKind::add_scalar: need(1); return add_scalar(inputs[0], attrs.factor);
    case OpKind::leaky_relu: need(1); return leaky_relu(inputs[0], attrs.negative_slope);
    case OpKind::tanh: need(1); return tanh(inputs[0]);
    case OpKind::sigmoid: need(1); return sigmoid(inputs[0]);
    case OpKind::softplus: need(1); return softplus(inputs[0]);
    case OpKind::softmax: need(1); return softmax(inputs[0]);
    case OpKind::log: need(1); return log(inputs[0]);
    case OpKind::exp: need(1); return exp(inputs[0]);
    case OpKind::sum: need(1); return sum(inputs[0]);
    case OpKind::sum_last: need(1); return sum_last(inputs[0]);
    case OpKind::mean: need(1); return mean(inputs[0]);
    case OpKind::stack: return stack(inputs);
    case OpKind::slice: need(1); return slice(inputs[0], attrs.begin, attrs.end);
    case OpKind::concat_last: need(2); return concat_last(inputs[0], inputs[1]);
    case OpKind::repeat_last: need(1); return repeat_last(inputs[0], attrs.count);
    case OpKind::log_sum_exp: need(1); return log_sum_exp(inputs[0]);
    case OpKind::leaf: break;
  }
  throw ContractError("forward_op: leaf is not an op");
}

}  // namespace ucd
