#pragma once
// Straight-loop double-precision versions of the network ops. They share no
// code with the library: indexing is spelled out per element so a layout
// mistake in either side shows up as a mismatch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "fusion_mammo/tensor/tensor.hpp"

namespace oracle {

struct Image {
  std::size_t h = 0, w = 0, c = 0;
  std::vector<double> v;  // (h,w,c) row-major

  double at(std::size_t y, std::size_t x, std::size_t ch) const { return v[(y * w + x) * c + ch]; }
};

inline std::vector<double> to_double(std::span<const float> x) { return {x.begin(), x.end()}; }

inline std::vector<double> to_double(const fusion_mammo::Tensor& t) { return to_double(t.data()); }

// kernels (k,k,cin,cout), bias (cout)
inline Image conv2d(const Image& in, const std::vector<double>& kernels, std::size_t k, std::size_t cout,
                    const std::vector<double>& bias, std::size_t stride = 1, std::size_t pad = 0) {
  Image out;
  out.h = (in.h + 2 * pad - k) / stride + 1;
  out.w = (in.w + 2 * pad - k) / stride + 1;
  out.c = cout;
  out.v.assign(out.h * out.w * out.c, 0.0);
  for (std::size_t oy = 0; oy < out.h; ++oy)
    for (std::size_t ox = 0; ox < out.w; ++ox)
      for (std::size_t co = 0; co < cout; ++co) {
        double s = bias[co];
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w)) continue;
            for (std::size_t ci = 0; ci < in.c; ++ci) {
              s += in.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci) *
                   kernels[((ky * k + kx) * in.c + ci) * cout + co];
            }
          }
        out.v[(oy * out.w + ox) * cout + co] = s;
      }
  return out;
}

inline Image maxpool(const Image& in, std::size_t window, std::size_t stride) {
  Image out;
  out.h = (in.h - window) / stride + 1;
  out.w = (in.w - window) / stride + 1;
  out.c = in.c;
  out.v.assign(out.h * out.w * out.c, 0.0);
  for (std::size_t oy = 0; oy < out.h; ++oy)
    for (std::size_t ox = 0; ox < out.w; ++ox)
      for (std::size_t ch = 0; ch < in.c; ++ch) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < window; ++y)
          for (std::size_t x = 0; x < window; ++x) m = std::max(m, in.at(oy * stride + y, ox * stride + x, ch));
        out.v[(oy * out.w + ox) * out.c + ch] = m;
      }
  return out;
}

// x (d), w (d,u), b (u)
inline std::vector<double> dense(const std::vector<double>& x, const std::vector<double>& w,
                                 const std::vector<double>& b) {
  const std::size_t u = b.size();
  std::vector<double> out(b);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < u; ++j) out[j] += x[i] * w[i * u + j];
  return out;
}

inline std::vector<double> relu(std::vector<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
  return x;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += e[i] = std::exp(z[i] - m);
  for (double& v : e) v /= s;
  return e;
}

inline double cross_entropy(const std::vector<std::vector<double>>& probs, const std::vector<std::size_t>& labels) {
  double s = 0.0;
  for (std::size_t r = 0; r < probs.size(); ++r) s -= std::log(std::max(probs[r][labels[r]], 1e-12));
  return s / static_cast<double>(probs.size());
}

/// Central differences, one coordinate at a time.
inline std::vector<double> numeric_gradient(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                            double h = 1e-3) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - n|| / max(||a||, ||n||), 0 when both vanish.
inline double relative_error(std::span<const float> analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double a = analytic[i];
    diff += (a - numeric[i]) * (a - numeric[i]);
    na += a * a;
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace oracle
