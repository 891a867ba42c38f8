#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "defsurf/common.hpp"

namespace defsurf::ad {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded operation (or leaf) of the tape. Values are dense 2D
// matrices; rank-1 data is stored as N x 1 and scalars as 1 x 1.
class Node {
 public:
  Mat value;
  Mat grad;  // empty until backward materializes it
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  // Reads this->grad and accumulates into parent grads; only set when
  // requires_grad is true.
  std::function<void()> backprop;
  const char* op_name = "leaf";

  bool has_grad() const { return grad.size() != 0; }

  void accumulate_grad(const Mat& g) {
    if (!has_grad()) grad = Mat::Zero(value.rows(), value.cols());
    grad += g;
  }
};

// Value-semantic handle to a node. Parameters are leaves with
// requires_grad = true whose grads persist across steps until zeroed.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Mat value);
  static Tensor parameter(Mat value);
  static Tensor scalar(Real value);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  const Mat& value() const { return node_->value; }
  // Direct mutation of a leaf's storage (optimizer updates).
  Mat& raw_value() { return node_->value; }
  const Mat& grad() const;
  bool has_grad() const { return node_->has_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool enabled);
  void zero_grad() { node_->grad.resize(0, 0); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Reverse pass from a 1 x 1 root. Each reachable node is visited exactly
// once in reverse topological order; repeated invocations on the same graph
// and inputs produce bitwise-identical gradients.
void backward(const Tensor& root);

// Builds a recorded op node. `make_backprop` receives the raw node pointer
// (owned by the node's closure) and returns the backward functor.
Tensor make_op(Mat value, std::vector<Tensor> parents,
               const std::function<std::function<void()>(Node*)>& make_backprop,
               const char* op_name);

}  // namespace defsurf::ad
