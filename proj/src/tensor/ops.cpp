#include "fusion_mammo/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/simd/kernels.hpp"

namespace fusion_mammo::ops {
namespace {

struct ImageDims {
  std::size_t batch, height, width, channels;
  bool batched;
};

ImageDims image_dims(const Shape& shape, const char* op) {
  if (shape.size() == 3) return {1, shape[0], shape[1], shape[2], false};
  if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3], true};
  throw DimensionError(std::string(op) + ": expected (H,W,C) or (B,H,W,C), got " + shape_to_string(shape));
}

Shape image_shape(const ImageDims& d, std::size_t h, std::size_t w, std::size_t c) {
  if (d.batched) return {d.batch, h, w, c};
  return {h, w, c};
}

struct RowDims {
  std::size_t rows, cols;
};

RowDims row_dims(const Shape& shape, const char* op) {
  if (shape.size() == 1) return {1, shape[0]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  throw DimensionError(std::string(op) + ": expected (N) or (B,N), got " + shape_to_string(shape));
}

void check_finite(const Tensor& t, const char* op) {
  for (float v : t.data()) {
    if (std::isnan(v)) throw NumericError(std::string(op) + ": NaN in input " + shape_to_string(t.shape()));
  }
}

void check_grad_size(std::span<const float> g, std::size_t expected, const char* what) {
  if (g.size() != expected) {
    throw DimensionError(std::string(what) + ": gradient buffer has " + std::to_string(g.size()) +
                         " values, expected " + std::to_string(expected));
  }
}

// Fills the (out_w x K*K*Cin) patch matrix for one output row of one image.
void im2col_row(const float* image, const ImageDims& d, std::size_t k, Conv2dOptions opt, std::size_t oy,
                std::size_t out_w, float* patches) {
  const std::size_t cin = d.channels;
  const std::size_t row_len = k * k * cin;
  const auto pad = static_cast<std::ptrdiff_t>(opt.padding);
  for (std::size_t ox = 0; ox < out_w; ++ox) {
    float* dst = patches + ox * row_len;
    for (std::size_t ky = 0; ky < k; ++ky) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opt.stride + ky) - pad;
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opt.stride + kx) - pad;
        float* cell = dst + (ky * k + kx) * cin;
        if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(d.height) ||
            ix >= static_cast<std::ptrdiff_t>(d.width)) {
          std::fill(cell, cell + cin, 0.0f);
        } else {
          const float* src = image + (static_cast<std::size_t>(iy) * d.width + static_cast<std::size_t>(ix)) * cin;
          std::copy(src, src + cin, cell);
        }
      }
    }
  }
}

void col2im_row_add(const float* patch_grads, const ImageDims& d, std::size_t k, Conv2dOptions opt,
                    std::size_t oy, std::size_t out_w, float* image_grad) {
  const std::size_t cin = d.channels;
  const std::size_t row_len = k * k * cin;
  const auto pad = static_cast<std::ptrdiff_t>(opt.padding);
  for (std::size_t ox = 0; ox < out_w; ++ox) {
    const float* src = patch_grads + ox * row_len;
    for (std::size_t ky = 0; ky < k; ++ky) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opt.stride + ky) - pad;
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.height)) continue;
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opt.stride + kx) - pad;
        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.width)) continue;
        float* dst = image_grad + (static_cast<std::size_t>(iy) * d.width + static_cast<std::size_t>(ix)) * cin;
        const float* cell = src + (ky * k + kx) * cin;
        for (std::size_t c = 0; c < cin; ++c) dst[c] += cell[c];
      }
    }
  }
}

}  // namespace

std::size_t window_output_extent(std::size_t in, std::size_t window, std::size_t stride, std::size_t padding) {
  if (stride < 1) throw ArgumentError("stride must be >= 1");
  if (window < 1) throw ArgumentError("window must be >= 1");
  if (window > in + 2 * padding) {
    throw DimensionError("window " + std::to_string(window) + " exceeds padded extent " +
                         std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - window) / stride + 1;
}

Shape conv2d_output_shape(const Shape& input, const Shape& kernels, Conv2dOptions options) {
  const ImageDims d = image_dims(input, "conv2d");
  if (kernels.size() != 4 || kernels[0] != kernels[1]) {
    throw DimensionError("conv2d: kernels must be (K,K,Cin,Cout), got " + shape_to_string(kernels));
  }
  if (kernels[2] != d.channels) {
    throw DimensionError("conv2d: kernel input channels " + shape_to_string(kernels) +
                         " do not match input " + shape_to_string(input));
  }
  const std::size_t k = kernels[0];
  return image_shape(d, window_output_extent(d.height, k, options.stride, options.padding),
                     window_output_extent(d.width, k, options.stride, options.padding), kernels[3]);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, Conv2dOptions options) {
  const Shape out_shape = conv2d_output_shape(input.shape(), kernels.shape(), options);
  const ImageDims d = image_dims(input.shape(), "conv2d");
  const std::size_t k = kernels.dim(0);
  const std::size_t cout = kernels.dim(3);
  if (bias.size() != cout) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match Cout " +
                         std::to_string(cout));
  }
  const ImageDims od = image_dims(out_shape, "conv2d");
  const std::size_t row_len = k * k * d.channels;
  const auto& kern = simd::kernels();

  Tensor out(out_shape);
  std::vector<float> patches(od.width * row_len);
  for (std::size_t b = 0; b < d.batch; ++b) {
    const float* image = input.data().data() + b * d.height * d.width * d.channels;
    for (std::size_t oy = 0; oy < od.height; ++oy) {
      float* out_row = out.data().data() + ((b * od.height + oy) * od.width) * cout;
      for (std::size_t ox = 0; ox < od.width; ++ox) {
        std::copy(bias.data().begin(), bias.data().end(), out_row + ox * cout);
      }
      im2col_row(image, d, k, options, oy, od.width, patches.data());
      kern.gemm_acc(od.width, cout, row_len, patches.data(), row_len, kernels.data().data(), cout, out_row, cout);
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, Conv2dOptions options,
                     std::span<const float> grad_output, std::span<float> grad_input,
                     std::span<float> grad_kernels, std::span<float> grad_bias) {
  const Shape out_shape = conv2d_output_shape(input.shape(), kernels.shape(), options);
  const ImageDims d = image_dims(input.shape(), "conv2d");
  const ImageDims od = image_dims(out_shape, "conv2d");
  const std::size_t k = kernels.dim(0);
  const std::size_t cout = kernels.dim(3);
  const std::size_t row_len = k * k * d.channels;
  check_grad_size(grad_output, shape_size(out_shape), "conv2d grad_output");
  if (!grad_input.empty()) check_grad_size(grad_input, input.size(), "conv2d grad_input");
  if (!grad_kernels.empty()) check_grad_size(grad_kernels, kernels.size(), "conv2d grad_kernels");
  if (!grad_bias.empty()) check_grad_size(grad_bias, cout, "conv2d grad_bias");

  const auto& kern = simd::kernels();
  const bool want_kernels = !grad_kernels.empty();
  const bool want_input = !grad_input.empty();

  // Weight and bias gradients sum over every output site, so they are
  // accumulated per row in float and folded into double totals.
  std::vector<double> kernel_total(want_kernels ? kernels.size() : 0, 0.0);
  std::vector<double> bias_total(cout, 0.0);
  std::vector<float> patches(want_kernels ? od.width * row_len : 0);
  std::vector<float> patches_t(want_kernels ? od.width * row_len : 0);
  std::vector<float> row_kernel_grad(want_kernels ? kernels.size() : 0);
  std::vector<float> kernels_t;
  std::vector<float> patch_grads;
  if (want_input) {
    kernels_t.resize(kernels.size());
    for (std::size_t p = 0; p < row_len; ++p) {
      for (std::size_t c = 0; c < cout; ++c) kernels_t[c * row_len + p] = kernels[p * cout + c];
    }
    patch_grads.resize(od.width * row_len);
  }

  for (std::size_t b = 0; b < d.batch; ++b) {
    const float* image = input.data().data() + b * d.height * d.width * d.channels;
    for (std::size_t oy = 0; oy < od.height; ++oy) {
      const float* g_row = grad_output.data() + ((b * od.height + oy) * od.width) * cout;
      for (std::size_t ox = 0; ox < od.width; ++ox) {
        for (std::size_t c = 0; c < cout; ++c) bias_total[c] += g_row[ox * cout + c];
      }
      if (want_kernels) {
        im2col_row(image, d, k, options, oy, od.width, patches.data());
        for (std::size_t ox = 0; ox < od.width; ++ox) {
          for (std::size_t p = 0; p < row_len; ++p) patches_t[p * od.width + ox] = patches[ox * row_len + p];
        }
        std::fill(row_kernel_grad.begin(), row_kernel_grad.end(), 0.0f);
        kern.gemm_acc(row_len, cout, od.width, patches_t.data(), od.width, g_row, cout, row_kernel_grad.data(), cout);
        for (std::size_t i = 0; i < kernel_total.size(); ++i) kernel_total[i] += row_kernel_grad[i];
      }
      if (want_input) {
        std::fill(patch_grads.begin(), patch_grads.end(), 0.0f);
        kern.gemm_acc(od.width, row_len, cout, g_row, cout, kernels_t.data(), row_len, patch_grads.data(), row_len);
        col2im_row_add(patch_grads.data(), d, k, options, oy, od.width,
                       grad_input.data() + b * d.height * d.width * d.channels);
      }
    }
  }
  for (std::size_t i = 0; i < kernel_total.size(); ++i) grad_kernels[i] += static_cast<float>(kernel_total[i]);
  if (!grad_bias.empty()) {
    for (std::size_t c = 0; c < cout; ++c) grad_bias[c] += static_cast<float>(bias_total[c]);
  }
}

PoolResult maxpool2d_forward(const Tensor& input, std::size_t window, std::size_t stride) {
  if (window < 1 || stride < 1) throw ArgumentError("maxpool2d: window and stride must be >= 1");
  const ImageDims d = image_dims(input.shape(), "maxpool2d");
  if (input.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("maxpool2d: input too large for 32-bit argmax indices");
  }
  const std::size_t oh = window_output_extent(d.height, window, stride);
  const std::size_t ow = window_output_extent(d.width, window, stride);
  PoolResult result{Tensor(image_shape(d, oh, ow, d.channels)), {}};
  result.argmax.resize(result.output.size());
  const float* in = input.data().data();
  float* out = result.output.data().data();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t c = 0; c < d.channels; ++c) {
          std::size_t best = ((b * d.height + oy * stride) * d.width + ox * stride) * d.channels + c;
          float best_value = in[best];
          for (std::size_t wy = 0; wy < window; ++wy) {
            for (std::size_t wx = 0; wx < window; ++wx) {
              const std::size_t idx =
                  ((b * d.height + oy * stride + wy) * d.width + ox * stride + wx) * d.channels + c;
              if (in[idx] > best_value) {
                best_value = in[idx];
                best = idx;
              }
            }
          }
          const std::size_t o = ((b * oh + oy) * ow + ox) * d.channels + c;
          out[o] = best_value;
          result.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return result;
}

void maxpool2d_backward(std::span<const std::uint32_t> argmax, std::span<const float> grad_output,
                        std::span<float> grad_input) {
  check_grad_size(grad_output, argmax.size(), "maxpool2d grad_output");
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= grad_input.size()) throw DimensionError("maxpool2d: argmax index out of range");
    grad_input[argmax[i]] += grad_output[i];
  }
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const RowDims in = row_dims(input.shape(), "dense");
  if (weights.rank() != 2 || weights.dim(0) != in.cols) {
    throw DimensionError("dense: weights " + shape_to_string(weights.shape()) + " do not match input " +
                         shape_to_string(input.shape()));
  }
  const std::size_t units = weights.dim(1);
  if (bias.size() != units) {
    throw DimensionError("dense: bias " + shape_to_string(bias.shape()) + " does not match " +
                         std::to_string(units) + " units");
  }
  Tensor out(input.rank() == 1 ? Shape{units} : Shape{in.rows, units});
  const auto& kern = simd::kernels();
  std::vector<double> acc(units);
  for (std::size_t r = 0; r < in.rows; ++r) {
    for (std::size_t u = 0; u < units; ++u) acc[u] = bias[u];
    const float* x = input.data().data() + r * in.cols;
    for (std::size_t i = 0; i < in.cols; ++i) {
      if (x[i] == 0.0f) continue;
      kern.axpy_f64(x[i], weights.data().data() + i * units, acc.data(), units);
    }
    for (std::size_t u = 0; u < units; ++u) out[r * units + u] = static_cast<float>(acc[u]);
  }
  return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, std::span<const float> grad_output,
                    std::span<float> grad_input, std::span<float> grad_weights, std::span<float> grad_bias) {
  const RowDims in = row_dims(input.shape(), "dense");
  const std::size_t units = weights.dim(1);
  check_grad_size(grad_output, in.rows * units, "dense grad_output");
  if (!grad_input.empty()) check_grad_size(grad_input, input.size(), "dense grad_input");
  if (!grad_weights.empty()) check_grad_size(grad_weights, weights.size(), "dense grad_weights");
  if (!grad_bias.empty()) check_grad_size(grad_bias, units, "dense grad_bias");
  const auto& kern = simd::kernels();
  for (std::size_t r = 0; r < in.rows; ++r) {
    const float* x = input.data().data() + r * in.cols;
    const float* g = grad_output.data() + r * units;
    if (!grad_bias.empty()) {
      for (std::size_t u = 0; u < units; ++u) grad_bias[u] += g[u];
    }
    for (std::size_t i = 0; i < in.cols; ++i) {
      const float* w_row = weights.data().data() + i * units;
      if (!grad_weights.empty() && x[i] != 0.0f) kern.axpy(x[i], g, grad_weights.data() + i * units, units);
      if (!grad_input.empty()) grad_input[r * in.cols + i] += static_cast<float>(kern.dot(w_row, g, units));
    }
  }
}

Tensor relu_forward(const Tensor& input) {
  check_finite(input, "relu");
  Tensor out(input.shape());
  simd::relu(input.data(), out.data());
  return out;
}

void relu_backward(const Tensor& output, std::span<const float> grad_output, std::span<float> grad_input) {
  check_grad_size(grad_output, output.size(), "relu grad_output");
  check_grad_size(grad_input, output.size(), "relu grad_input");
  for (std::size_t i = 0; i < output.size(); ++i) {
    if (output[i] > 0.0f) grad_input[i] += grad_output[i];
  }
}

Tensor softmax_forward(const Tensor& logits) {
  check_finite(logits, "softmax");
  const RowDims d = row_dims(logits.shape(), "softmax");
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < d.rows; ++r) {
    const float* x = logits.data().data() + r * d.cols;
    const float peak = *std::max_element(x, x + d.cols);
    double total = 0.0;
    std::vector<double> e(d.cols);
    for (std::size_t c = 0; c < d.cols; ++c) {
      e[c] = std::exp(static_cast<double>(x[c]) - static_cast<double>(peak));
      total += e[c];
    }
    for (std::size_t c = 0; c < d.cols; ++c) out[r * d.cols + c] = static_cast<float>(e[c] / total);
  }
  return out;
}

void softmax_backward(const Tensor& probs, std::span<const float> grad_output, std::span<float> grad_input) {
  const RowDims d = row_dims(probs.shape(), "softmax");
  check_grad_size(grad_output, probs.size(), "softmax grad_output");
  check_grad_size(grad_input, probs.size(), "softmax grad_input");
  for (std::size_t r = 0; r < d.rows; ++r) {
    const float* y = probs.data().data() + r * d.cols;
    const float* g = grad_output.data() + r * d.cols;
    double inner = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) inner += static_cast<double>(g[c]) * y[c];
    for (std::size_t c = 0; c < d.cols; ++c) {
      grad_input[r * d.cols + c] += static_cast<float>(y[c] * (g[c] - inner));
    }
  }
}

namespace {
void check_labels(const RowDims& d, std::span<const std::size_t> labels) {
  if (labels.size() != d.rows) {
    throw ArgumentError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(d.rows) + " rows");
  }
  for (std::size_t label : labels) {
    if (label >= d.cols) {
      throw ArgumentError("cross_entropy: label " + std::to_string(label) + " outside [0," +
                          std::to_string(d.cols) + ")");
    }
  }
}
}  // namespace

double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
  const RowDims d = row_dims(probs.shape(), "cross_entropy");
  check_labels(d, labels);
  double total = 0.0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) row_sum += probs[r * d.cols + c];
    if (std::abs(row_sum - 1.0) > 1e-4) {
      throw ArgumentError("cross_entropy: row " + std::to_string(r) + " sums to " + std::to_string(row_sum));
    }
    const float p = std::max(probs[r * d.cols + labels[r]], kProbabilityFloor);
    total -= std::log(static_cast<double>(p));
  }
  return total / static_cast<double>(d.rows);
}

void cross_entropy_backward(const Tensor& probs, std::span<const std::size_t> labels, float grad_loss,
                            std::span<float> grad_probs) {
  const RowDims d = row_dims(probs.shape(), "cross_entropy");
  check_labels(d, labels);
  check_grad_size(grad_probs, probs.size(), "cross_entropy grad_probs");
  const double scale = static_cast<double>(grad_loss) / static_cast<double>(d.rows);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const float p = probs[r * d.cols + labels[r]];
    // Clamped probabilities are constant in p, so they pass no gradient.
    if (p >= kProbabilityFloor) grad_probs[r * d.cols + labels[r]] += static_cast<float>(-scale / p);
  }
}

}  // namespace fusion_mammo::ops
