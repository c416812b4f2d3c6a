#pragma once

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// A Tensor is a shared handle to a graph node. Operations build the graph
// eagerly; backward() walks it in reverse topological order and adds into
// the grad of every node that requires one. Leaf grads accumulate across
// backward() calls until zero_grad(). The engine is instantiated for float
// (training) and double (gradient checks).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmsep/kernels.hpp"

namespace cmsep::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value) { return from({1}, {value}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  // For optimizers and initializers; does not record anything in the graph.
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && numel() > 0; }
  bool requires_grad() const { return node_->requires_grad; }
  T item() const;

  void zero_grad();
  // Throws std::invalid_argument unless this tensor holds a single element.
  void backward();
  // Same values, no history.
  Tensor detach() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Elementwise; shapes must match exactly.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> abs(const Tensor<T>& a);
template <typename T> Tensor<T> elu(const Tensor<T>& a, T alpha = T(1));

// Reductions to a one-element tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

// x: [Cin, H, W], weights: [Cout, Cin, k, k], bias: [Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias,
                 std::size_t stride, kernels::Padding padding);

// Concatenation along `axis`; all other extents must agree.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

// 2-D only.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// Numerically stable softmax along `axis` (max subtracted per slice).
template <typename T> Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);

// Spatial helpers on [C, H, W].
template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                std::size_t right);
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width);
// 2x2 average pooling, stride 2. H and W must be even.
template <typename T> Tensor<T> avg_pool2(const Tensor<T>& x);
// Nearest-neighbour x2 in both spatial dims.
template <typename T> Tensor<T> upsample_nearest2(const Tensor<T>& x);

}  // namespace cmsep::ag
