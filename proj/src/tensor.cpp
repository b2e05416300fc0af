#include "psg/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace psg {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<Tensor> inputs;
  Tensor::BackwardFn backward;
};

}  // namespace detail

namespace {

std::uint64_t next_sequence_id() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  if (values.size() != numel_of(shape)) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = next_sequence_id();
  return node;
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel_of(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value),
                          requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

Tensor Tensor::record(Shape shape, std::vector<double> values,
                      std::vector<Tensor> inputs, BackwardFn backward) {
  const bool needs_grad = std::any_of(
      inputs.begin(), inputs.end(),
      [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  auto node = make_node(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node().values.size(); }

std::span<const double> Tensor::values() const { return node().values; }

std::span<double> Tensor::mutable_values() {
  auto& n = node();
  if (n.backward) throw std::logic_error("cannot overwrite an op output");
  return n.values;
}

double Tensor::item() const {
  auto& n = node();
  if (n.values.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(n.shape));
  }
  return n.values[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }

bool Tensor::is_leaf() const { return !node().backward; }

bool Tensor::has_grad() const { return !node().grad.empty(); }

std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::mutable_grad() {
  auto& n = node();
  if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  if (!n.grad.empty()) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

std::uint64_t Tensor::sequence_id() const { return node().seq; }

std::vector<Tensor> Tensor::inputs() const { return node().inputs; }

Tape::Tape(const Tensor& root) {
  if (!root.defined() || !root.requires_grad()) return;
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root.node_};
  seen.insert(root.node_.get());
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : node->inputs) {
      if (!in.defined() || !in.requires_grad()) continue;
      if (seen.insert(in.node_.get()).second) stack.push_back(in.node_);
    }
    nodes_.push_back(std::move(node));
  }
  std::sort(nodes_.begin(), nodes_.end(),
            [](const auto& a, const auto& b) { return a->seq < b->seq; });
}

std::vector<std::uint64_t> Tape::recording_order() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(nodes_.size());
  for (const auto& n : nodes_) ids.push_back(n->seq);
  return ids;
}

void Tape::reset_interior_grads() const {
  for (const auto& n : nodes_) {
    if (n->backward) n->grad.assign(n->values.size(), 0.0);
  }
}

void Tape::run_backward() const {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& n = **it;
    if (n.backward) n.backward(n.values, n.grad);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " +
                     shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward on a loss that does not require grad");
  }
  Tape tape(loss);
  tape.reset_interior_grads();
  Tensor root = loss;
  root.mutable_grad()[0] += 1.0;
  tape.run_backward();
}

Tensor detach(const Tensor& t) {
  auto vals = t.values();
  return Tensor::from_values(t.shape(), {vals.begin(), vals.end()}, false);
}

}  // namespace psg
