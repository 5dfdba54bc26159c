#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fusion_mammo/tensor/ops.hpp"
#include "fusion_mammo/tensor/tensor.hpp"

namespace fusion_mammo {

using NodeId = std::size_t;

enum class OpKind {
  input,
  variable,
  parameter,
  conv2d,
  maxpool2d,
  flatten,
  dense,
  relu,
  softmax,
  cross_entropy,
  add,
  mul,
  sum,
};

/// Tape of operations in construction order. Node i only ever reads nodes
/// with smaller ids, so construction order is a topological order and
/// backward() walks it in reverse.
///
/// A graph is single-use: build, call backward once, discard.
class ComputeGraph {
 public:
  /// Constant leaf; never receives a gradient.
  NodeId input(Tensor value);
  /// Leaf that owns its gradient, readable through grad().
  NodeId variable(Tensor value);
  /// Leaf bound to a caller-owned tensor. Gradients accumulate into
  /// param.grad(); the tensor must outlive the graph.
  NodeId parameter(Tensor& param);

  NodeId conv2d(NodeId input, NodeId kernels, NodeId bias, ops::Conv2dOptions options = {});
  NodeId maxpool2d(NodeId input, std::size_t window, std::size_t stride);
  /// (B,H,W,C) -> (B,H*W*C); (H,W,C) -> (H*W*C).
  NodeId flatten(NodeId input);
  NodeId dense(NodeId input, NodeId weights, NodeId bias);
  NodeId relu(NodeId input);
  NodeId softmax(NodeId input);
  NodeId cross_entropy(NodeId probs, std::vector<std::size_t> labels);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId sum(NodeId input);

  const Tensor& value(NodeId id) const;
  /// Empty until backward() routes a gradient here.
  std::span<const float> grad(NodeId id) const;
  OpKind kind(NodeId id) const;
  std::span<const NodeId> inputs(NodeId id) const;
  bool requires_grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients in reverse order.
  /// Throws ArgumentError if the node is not a scalar.
  void backward(NodeId loss);

 private:
  struct Node {
    Node(OpKind k, std::vector<NodeId> in, Tensor v) : kind(k), inputs(std::move(in)), value(std::move(v)) {}

    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    std::vector<float> grad;
    bool requires_grad = false;
    Tensor* bound = nullptr;
    ops::Conv2dOptions conv;
    std::vector<std::uint32_t> argmax;
    std::vector<std::size_t> labels;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  std::span<float> grad_buffer(NodeId id);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
};

/// Free-function form of ComputeGraph::backward.
inline void backward(ComputeGraph& graph, NodeId loss) { graph.backward(loss); }

}  // namespace fusion_mammo
