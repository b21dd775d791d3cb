#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "geolab/nn/tensor.hpp"

namespace geolab::nn {

class Graph;

/// Handle to a node on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return graph != nullptr && id >= 0; }
  /// Scalar value of a 1 x 1 node.
  double item() const;
};

/// Reverse-mode tape. Nodes are appended in execution order and the backward
/// pass walks them in reverse, so gradient accumulation order is fixed.
class Graph {
 public:
  using Backward = std::function<void(Graph&, int self)>;

  Var constant(Mat value);
  /// Binds a parameter; repeated calls return the same node.
  Var param(Parameter& p);
  Var make(Mat value, bool needs_grad, Backward backward);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient buffer of a node, zero-initialised on first access.
  Mat& grad(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

  /// Seeds d(loss)/d(loss) = 1 for the 1 x 1 node `loss`, runs the tape in
  /// reverse and adds parameter gradients into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace geolab::nn
