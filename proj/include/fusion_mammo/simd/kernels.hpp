#pragma once

// Data-parallel inner loops used by the tensor ops, KNN, and dense layers.
//
// Each kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is chosen once at startup from CPUID and can
// be pinned with FUSION_MAMMO_SIMD=scalar|avx2 or set_backend(). Variants are
// not bit-identical to the reference (lane-wise partial sums, fused
// multiply-add); tests/unit/test_simd_kernels.cpp bounds the difference.

#include <cstddef>
#include <span>
#include <string_view>

namespace fusion_mammo::simd {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend backend);

struct KernelTable {
  /// y[i] += alpha * x[i]
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  /// y[i] += alpha * x[i], accumulated in double
  void (*axpy_f64)(float alpha, const float* x, double* y, std::size_t n);
  /// sum x[i] * y[i] in double
  double (*dot)(const float* x, const float* y, std::size_t n);
  /// sum (x[i] - y[i])^2 in double
  double (*squared_distance)(const float* x, const float* y, std::size_t n);
  /// C[m x n] += A[m x k] * B[k x n], all row-major with explicit leading dimensions.
  /// Each output element is summed over k in ascending order.
  void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                   const float* b, std::size_t ldb, float* c, std::size_t ldc);
  /// y[i] = max(x[i], 0)
  void (*relu)(const float* x, float* y, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variants were not compiled in.
const KernelTable* avx2_kernels();

bool backend_supported(Backend backend);
/// Best backend this CPU and build support.
Backend detected_backend();
Backend active_backend();
/// Throws ArgumentError when the backend is unsupported here.
void set_backend(Backend backend);
const KernelTable& kernels();
const KernelTable& kernels_for(Backend backend);

/// Restores the previous backend on scope exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) { set_backend(backend); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

// Span front-ends over the active table.
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(float alpha, std::span<const float> x, std::span<double> y);
double dot(std::span<const float> x, std::span<const float> y);
double squared_distance(std::span<const float> x, std::span<const float> y);
void relu(std::span<const float> x, std::span<float> y);

}  // namespace fusion_mammo::simd
