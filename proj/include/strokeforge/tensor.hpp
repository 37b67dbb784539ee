#pragma once

// Dense row-major 64-bit tensor with tape-free reverse-mode differentiation.
//
// Each Tensor is a shared handle to a Node. Operations that consume at least
// one tensor with requires_grad record their inputs and a backward closure on
// the output node; the recorded nodes form a DAG that backward() walks in
// reverse topological order. Leaf gradients accumulate (+=) across calls until
// zero_grad() is invoked.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace strokeforge {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value);

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient view; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad();

  /// Reverse sweep from this scalar. Leaf gradients accumulate.
  void backward() const;

  /// New leaf holding a copy of the values, cut from the graph.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Builds an op output. The backward closure is attached only when grad mode
/// is on and some input requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   BackwardFn backward_fn, const char* op);

}  // namespace strokeforge
