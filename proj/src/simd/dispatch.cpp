#include <atomic>
#include <cstdlib>
#include <string>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/simd/kernels.hpp"

namespace fusion_mammo::simd {

#if !FUSION_MAMMO_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if FUSION_MAMMO_HAVE_AVX2 && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("FUSION_MAMMO_SIMD")) {
    const std::string value(env);
    if (value == "scalar") return Backend::scalar;
    if (value == "avx2" && backend_supported(Backend::avx2)) return Backend::avx2;
  }
  return detected_backend();
}

std::atomic<Backend>& active() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_supported(Backend backend) {
  if (backend == Backend::scalar) return true;
  static const bool avx2 = avx2_kernels() != nullptr && cpu_has_avx2();
  return avx2;
}

Backend detected_backend() {
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw ArgumentError("SIMD backend " + std::string(to_string(backend)) + " is not supported on this CPU/build");
  }
  active().store(backend, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Backend backend) {
  if (backend == Backend::avx2 && backend_supported(Backend::avx2)) return *avx2_kernels();
  return scalar_kernels();
}

const KernelTable& kernels() { return kernels_for(active_backend()); }

namespace {
void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  }
}
}  // namespace

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  require_same_length(x.size(), y.size(), "axpy");
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

void axpy(float alpha, std::span<const float> x, std::span<double> y) {
  require_same_length(x.size(), y.size(), "axpy");
  kernels().axpy_f64(alpha, x.data(), y.data(), x.size());
}

double dot(std::span<const float> x, std::span<const float> y) {
  require_same_length(x.size(), y.size(), "dot");
  return kernels().dot(x.data(), y.data(), x.size());
}

double squared_distance(std::span<const float> x, std::span<const float> y) {
  require_same_length(x.size(), y.size(), "squared_distance");
  return kernels().squared_distance(x.data(), y.data(), x.size());
}

void relu(std::span<const float> x, std::span<float> y) {
  require_same_length(x.size(), y.size(), "relu");
  kernels().relu(x.data(), y.data(), x.size());
}

}  // namespace fusion_mammo::simd
