#include "defsurf/ad/tensor.hpp"

#include <unordered_set>

namespace defsurf::ad {

Tensor Tensor::constant(Mat value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = false;
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Mat value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->op_name = "parameter";
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

const Mat& Tensor::grad() const {
  if (!node_->has_grad())
    throw UsageError("Tensor::grad: no gradient has been accumulated");
  return node_->grad;
}

void Tensor::set_requires_grad(bool enabled) {
  if (!node_->parents.empty())
    throw UsageError("set_requires_grad: only leaves can be toggled");
  node_->requires_grad = enabled;
}

void backward(const Tensor& root) {
  if (!root.defined() || root.rows() != 1 || root.cols() != 1)
    throw UsageError("backward: root must be a defined 1x1 scalar");

  // Iterative post-order DFS; reversed post-order is a valid topological
  // order with the root first.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* parent = node->parents[next_child].get();
      ++next_child;
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) node->grad.resize(0, 0);
  root.node()->accumulate_grad(Mat::Ones(1, 1));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->has_grad() && node->requires_grad)
      node->backprop();
  }
}

Tensor make_op(Mat value, std::vector<Tensor> parents,
               const std::function<std::function<void()>(Node*)>& make_backprop,
               const char* op_name) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op_name = op_name;
  node->parents.reserve(parents.size());
  for (const Tensor& p : parents) {
    node->parents.push_back(p.node());
    node->requires_grad = node->requires_grad || p.requires_grad();
  }
  if (node->requires_grad) node->backprop = make_backprop(node.get());
  return Tensor(std::move(node));
}

}  // namespace defsurf::ad
