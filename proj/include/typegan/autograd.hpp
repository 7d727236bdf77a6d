#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "typegan/tensor.hpp"

namespace typegan {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  Tensor& ensure_grad();
};

/// Handle to a value in a define-by-run graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  /// Gradient accumulated by backward(); zero-filled if nothing flowed here.
  const Tensor& grad() const { return node_->ensure_grad(); }
  void zero_grad() { node_->grad = Tensor(); }

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  bool valid() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> node) {
    Var v;
    v.node_ = std::move(node);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op result. The backward closure is kept only when grad mode is
/// on and at least one input requires a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Seeds d(root)/d(root) = 1 for a scalar root and propagates to every leaf.
void backward(const Var& root);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace typegan
