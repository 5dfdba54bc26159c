#pragma once

// Eager forward/backward kernels over NHWC tensors. The compute graph in
// graph.hpp wires these together; they are also usable directly for
// inference. Image tensors are (H,W,C) or batched (B,H,W,C).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fusion_mammo/tensor/tensor.hpp"

namespace fusion_mammo::ops {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Spatial output extent for a sliding window: floor((in + 2*pad - window) / stride) + 1.
std::size_t window_output_extent(std::size_t in, std::size_t window, std::size_t stride, std::size_t padding = 0);

Shape conv2d_output_shape(const Shape& input, const Shape& kernels, Conv2dOptions options = {});

/// Cross-correlation (no kernel flip) plus bias. kernels are (K,K,Cin,Cout).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, Conv2dOptions options = {});

/// Accumulates into the given gradient buffers; grad_input may be empty to skip it.
void conv2d_backward(const Tensor& input, const Tensor& kernels, Conv2dOptions options,
                     std::span<const float> grad_output, std::span<float> grad_input,
                     std::span<float> grad_kernels, std::span<float> grad_bias);

struct PoolResult {
  Tensor output;
  /// Flat input index of each output's maximum (first row-major occurrence on ties).
  std::vector<std::uint32_t> argmax;
};

PoolResult maxpool2d_forward(const Tensor& input, std::size_t window, std::size_t stride);
void maxpool2d_backward(std::span<const std::uint32_t> argmax, std::span<const float> grad_output,
                        std::span<float> grad_input);

/// input (D) or (B,D); weights (D,U); bias (U). Sums run in double.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weights, std::span<const float> grad_output,
                    std::span<float> grad_input, std::span<float> grad_weights, std::span<float> grad_bias);

Tensor relu_forward(const Tensor& input);
void relu_backward(const Tensor& output, std::span<const float> grad_output, std::span<float> grad_input);

/// Softmax along the last axis of a (C) or (B,C) tensor, max-subtracted.
Tensor softmax_forward(const Tensor& logits);
void softmax_backward(const Tensor& probs, std::span<const float> grad_output, std::span<float> grad_input);

inline constexpr float kProbabilityFloor = 1e-12f;

/// Mean of -log(max(p[i, label_i], 1e-12)) over rows of a (C) or (B,C) tensor.
double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels);
void cross_entropy_backward(const Tensor& probs, std::span<const std::size_t> labels, float grad_loss,
                            std::span<float> grad_probs);

}  // namespace fusion_mammo::ops
