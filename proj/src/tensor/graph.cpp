#include "fusion_mammo/tensor/graph.hpp"

#include <algorithm>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo {

NodeId ComputeGraph::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw ArgumentError("graph input id " + std::to_string(in) + " does not exist yet");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const ComputeGraph::Node& ComputeGraph::node(NodeId id) const {
  if (id >= nodes_.size()) throw ArgumentError("unknown graph node " + std::to_string(id));
  return nodes_[id];
}

NodeId ComputeGraph::input(Tensor value) {
  Node n{OpKind::input, {}, std::move(value)};
  return push(std::move(n));
}

NodeId ComputeGraph::variable(Tensor value) {
  Node n{OpKind::variable, {}, std::move(value)};
  n.requires_grad = true;
  return push(std::move(n));
}

NodeId ComputeGraph::parameter(Tensor& param) {
  Node n{OpKind::parameter, {}, Tensor{}};
  n.bound = &param;
  n.requires_grad = true;
  return push(std::move(n));
}

const Tensor& ComputeGraph::value(NodeId id) const {
  const Node& n = node(id);
  return n.bound ? *n.bound : n.value;
}

std::span<const float> ComputeGraph::grad(NodeId id) const {
  const Node& n = node(id);
  if (n.bound) return n.bound->grad();
  return n.grad;
}

OpKind ComputeGraph::kind(NodeId id) const { return node(id).kind; }
std::span<const NodeId> ComputeGraph::inputs(NodeId id) const { return node(id).inputs; }
bool ComputeGraph::requires_grad(NodeId id) const { return node(id).requires_grad; }

std::span<float> ComputeGraph::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return {};
  if (n.bound) return n.bound->ensure_grad();
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0f);
  return n.grad;
}

NodeId ComputeGraph::conv2d(NodeId input, NodeId kernels, NodeId bias, ops::Conv2dOptions options) {
  Node n{OpKind::conv2d, {input, kernels, bias},
         ops::conv2d_forward(value(input), value(kernels), value(bias), options)};
  n.conv = options;
  return push(std::move(n));
}

NodeId ComputeGraph::maxpool2d(NodeId input, std::size_t window, std::size_t stride) {
  auto pooled = ops::maxpool2d_forward(value(input), window, stride);
  Node n{OpKind::maxpool2d, {input}, std::move(pooled.output)};
  n.argmax = std::move(pooled.argmax);
  return push(std::move(n));
}

NodeId ComputeGraph::flatten(NodeId input) {
  const Tensor& in = value(input);
  Shape shape;
  if (in.rank() == 4) {
    shape = {in.dim(0), in.dim(1) * in.dim(2) * in.dim(3)};
  } else if (in.rank() == 3) {
    shape = {in.size()};
  } else {
    throw DimensionError("flatten: expected (H,W,C) or (B,H,W,C), got " + shape_to_string(in.shape()));
  }
  return push(Node{OpKind::flatten, {input}, in.reshaped(shape)});
}

NodeId ComputeGraph::dense(NodeId input, NodeId weights, NodeId bias) {
  return push(Node{OpKind::dense, {input, weights, bias}, ops::dense_forward(value(input), value(weights), value(bias))});
}

NodeId ComputeGraph::relu(NodeId input) {
  return push(Node{OpKind::relu, {input}, ops::relu_forward(value(input))});
}

NodeId ComputeGraph::softmax(NodeId input) {
  return push(Node{OpKind::softmax, {input}, ops::softmax_forward(value(input))});
}

NodeId ComputeGraph::cross_entropy(NodeId probs, std::vector<std::size_t> labels) {
  const double loss = ops::cross_entropy(value(probs), labels);
  Node n{OpKind::cross_entropy, {probs}, Tensor(Shape{1}, static_cast<float>(loss))};
  n.labels = std::move(labels);
  return push(std::move(n));
}

NodeId ComputeGraph::add(NodeId a, NodeId b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.shape() != y.shape()) {
    throw DimensionError("add: shapes " + shape_to_string(x.shape()) + " and " + shape_to_string(y.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return push(Node{OpKind::add, {a, b}, std::move(out)});
}

NodeId ComputeGraph::mul(NodeId a, NodeId b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.shape() != y.shape()) {
    throw DimensionError("mul: shapes " + shape_to_string(x.shape()) + " and " + shape_to_string(y.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return push(Node{OpKind::mul, {a, b}, std::move(out)});
}

NodeId ComputeGraph::sum(NodeId input) {
  double total = 0.0;
  for (float v : value(input).data()) total += v;
  return push(Node{OpKind::sum, {input}, Tensor(Shape{1}, static_cast<float>(total))});
}

void ComputeGraph::backward(NodeId loss) {
  const Node& root = node(loss);
  if (value(loss).size() != 1) {
    throw ArgumentError("backward: loss node " + std::to_string(loss) + " has shape " +
                        shape_to_string(value(loss).shape()) + ", expected a scalar");
  }
  if (!root.requires_grad) return;
  grad_buffer(loss)[0] += 1.0f;
  for (NodeId id = loss + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.inputs.empty()) continue;
    if (n.grad.empty()) continue;
    backward_node(id);
  }
}

void ComputeGraph::backward_node(NodeId id) {
  const Node& n = nodes_[id];
  const std::span<const float> g = n.grad;
  switch (n.kind) {
    case OpKind::input:
    case OpKind::variable:
    case OpKind::parameter:
      break;
    case OpKind::conv2d:
      ops::conv2d_backward(value(n.inputs[0]), value(n.inputs[1]), n.conv, g, grad_buffer(n.inputs[0]),
                           grad_buffer(n.inputs[1]), grad_buffer(n.inputs[2]));
      break;
    case OpKind::maxpool2d:
      if (auto gi = grad_buffer(n.inputs[0]); !gi.empty()) ops::maxpool2d_backward(n.argmax, g, gi);
      break;
    case OpKind::flatten:
      if (auto gi = grad_buffer(n.inputs[0]); !gi.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
      break;
    case OpKind::dense:
      ops::dense_backward(value(n.inputs[0]), value(n.inputs[1]), g, grad_buffer(n.inputs[0]),
                          grad_buffer(n.inputs[1]), grad_buffer(n.inputs[2]));
      break;
    case OpKind::relu:
      if (auto gi = grad_buffer(n.inputs[0]); !gi.empty()) ops::relu_backward(n.value, g, gi);
      break;
    case OpKind::softmax:
      if (auto gi = grad_buffer(n.inputs[0]); !gi.empty()) ops::softmax_backward(n.value, g, gi);
      break;
    case OpKind::cross_entropy:
      if (auto gi = grad_buffer(n.inputs[0]); !gi.empty()) {
        ops::cross_entropy_backward(value(n.inputs[0]), n.labels, g[0], gi);
      }
      break;
    case OpKind::add:
      for (NodeId in : n.inputs) {
        if (auto gi = grad_buffer(in); !gi.empty()) {
          for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
      }
      break;
    case OpKind::mul: {
      const Tensor& x = value(n.inputs[0]);
      const Tensor& y = value(n.inputs[1]);
      if (auto gx = grad_buffer(n.inputs[0]); !gx.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
      }
      if (auto gy = grad_buffer(n.inputs[1]); !gy.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x[i];
      }
      break;
    }
    case OpKind::sum:
      if (auto gi = grad_buffer(n.inputs[0]); !gi.empty()) {
        for (float& v : gi) v += g[0];
      }
      break;
  }
}

}  // namespace fusion_mammo
