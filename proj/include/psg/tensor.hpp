#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psg {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised by every op whose operands have incompatible extents.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node;
}

/// Handle to a node of the differentiation graph.
///
/// Copies share the underlying storage. Values are fixed once an op has
/// produced them; only leaves (parameters, inputs) may be written through
/// mutable_values(), and only gradients accumulate afterwards.
class Tensor {
 public:
  /// Called during backward with the output's values and gradient. The op
  /// adds its contribution into the gradients of the inputs it captured.
  using BackwardFn =
      std::function<void(std::span<const double> out_values,
                         std::span<const double> out_grad)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Records an op result. The result requires grad iff any input does; if
  /// none does, inputs and backward are dropped so the value is a constant.
  static Tensor record(Shape shape, std::vector<double> values,
                       std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Leaf tensors only; writing an op output would invalidate the graph.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<double> mutable_grad();
  void zero_grad();

  /// Monotone id assigned when the tensor was recorded.
  std::uint64_t sequence_id() const;
  /// Inputs of the op that produced this tensor (empty for leaves).
  std::vector<Tensor> inputs() const;

  bool same_node(const Tensor& other) const noexcept {
    return node_ == other.node_;
  }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;

  friend class Tape;
};

/// Recording-ordered view of every grad-requiring node reachable from a root.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  /// Sequence ids in recording order (strictly increasing).
  std::vector<std::uint64_t> recording_order() const;
  /// Visits nodes in exact reverse recording order, invoking each backward.
  void run_backward() const;
  /// Zero the gradients of every non-leaf node on the tape.
  void reset_interior_grads() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Populates gradients of every grad-requiring tensor reachable from `loss`.
/// Leaf gradients accumulate across calls; interior gradients are recomputed.
void backward(const Tensor& loss);

/// Same values, severed from the producing graph.
Tensor detach(const Tensor& t);

}  // namespace psg
