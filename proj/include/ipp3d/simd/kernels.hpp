#pragma once

// Dense double-precision kernels behind a runtime-selected function table.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2+FMA
// on x86-64, NEON on aarch64) are selected at first use when the CPU supports
// them. Setting IPP3D_SIMD=scalar in the environment forces the reference path.
//
// All matrices are row-major with explicit leading dimensions.

#include <cstddef>
#include <span>
#include <string_view>

namespace ipp3d::simd {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C(m x n) += alpha * A(m x k) * B(k x n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc);
  // C(m x n) += alpha * A(m x k) * B(n x k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc);
  // C(m x n) += alpha * A(k x m)^T * B(k x n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc);
};

bool backend_available(Backend b);
std::string_view backend_name(Backend b);

Backend active_backend();
// Throws std::invalid_argument if the backend is not available on this CPU.
void set_backend(Backend b);

const KernelTable& kernels();
const KernelTable& kernels(Backend b);

namespace detail {
const KernelTable& scalar_table();
#if defined(IPP3D_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(IPP3D_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace ipp3d::simd
