#include <arm_neon.h>

#include "ipp3d/simd/kernels.hpp"

namespace ipp3d::simd::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_neon(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      float64x2_t s0 = vdupq_n_f64(0.0);
      float64x2_t s1 = vdupq_n_f64(0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const float64x2_t av = vdupq_n_f64(a[i * lda + p]);
        s0 = vfmaq_f64(s0, av, vld1q_f64(b + p * ldb + j));
        s1 = vfmaq_f64(s1, av, vld1q_f64(b + p * ldb + j + 2));
      }
      double* cr = c + i * ldc + j;
      const float64x2_t va = vdupq_n_f64(alpha);
      vst1q_f64(cr, vfmaq_f64(vld1q_f64(cr), va, s0));
      vst1q_f64(cr + 2, vfmaq_f64(vld1q_f64(cr + 2), va, s1));
    }
    for (; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] += alpha * s;
    }
  }
}

void gemm_nt_neon(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * ldc + j] += alpha * dot_neon(a + i * lda, b + j * ldb, k);
    }
  }
}

void gemm_tn_neon(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      axpy_neon(alpha * a[p * lda + i], b + p * ldb, c + i * ldc, n);
    }
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{dot_neon, axpy_neon, gemm_nn_neon, gemm_nt_neon,
                                 gemm_tn_neon};
  return table;
}

}  // namespace ipp3d::simd::detail
