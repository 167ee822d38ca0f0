// Compiled with -mavx2 -mfma. Only reached after a cpuid check in dispatch.cpp.

#include <immintrin.h>

#include "ipp3d/simd/kernels.hpp"

namespace ipp3d::simd::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4x8 register block: C[i..i+4, j..j+8] += alpha * A[i..i+4, :] * B[:, j..j+8]
inline void block_4x8(std::size_t k, double alpha, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  const __m256d va = _mm256_set1_pd(alpha);
  auto store = [&](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_fmadd_pd(va, lo, _mm256_loadu_pd(dst)));
    _mm256_storeu_pd(dst + 4, _mm256_fmadd_pd(va, hi, _mm256_loadu_pd(dst + 4)));
  };
  store(c, c00, c01);
  store(c + ldc, c10, c11);
  store(c + 2 * ldc, c20, c21);
  store(c + 3 * ldc, c30, c31);
}

inline void block_1x4(std::size_t k, double alpha, const double* a,
                      const double* b, std::size_t ldb, double* c) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb),
                          acc);
  }
  _mm256_storeu_pd(c, _mm256_fmadd_pd(_mm256_set1_pd(alpha), acc,
                                      _mm256_loadu_pd(c)));
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      block_4x8(k, alpha, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
    for (std::size_t r = i; r < i + 4; ++r) {
      std::size_t jj = j;
      for (; jj + 4 <= n; jj += 4) {
        block_1x4(k, alpha, a + r * lda, b + jj, ldb, c + r * ldc + jj);
      }
      for (; jj < n; ++jj) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[r * lda + p] * b[p * ldb + jj];
        c[r * ldc + jj] += alpha * s;
      }
    }
  }
  for (; i < m; ++i) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      block_1x4(k, alpha, a + i * lda, b + j, ldb, c + i * ldc + j);
    }
    for (; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] += alpha * s;
    }
  }
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a + i * lda;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d av = _mm256_loadu_pd(ar + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += ar[p] * b0[p];
        r1 += ar[p] * b1[p];
        r2 += ar[p] * b2[p];
        r3 += ar[p] * b3[p];
      }
      double* cr = c + i * ldc + j;
      cr[0] += alpha * r0;
      cr[1] += alpha * r1;
      cr[2] += alpha * r2;
      cr[3] += alpha * r3;
    }
    for (; j < n; ++j) c[i * ldc + j] += alpha * dot_avx2(ar, b + j * ldb, k);
  }
}

// Same 4x8 register block as gemm_nn, reading A column-wise (A is k x m).
inline void block_tn_4x8(std::size_t k, double alpha, const double* a,
                         std::size_t lda, const double* b, std::size_t ldb,
                         double* c, std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * lda;
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(ap);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(ap + 1);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(ap + 2);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(ap + 3);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  const __m256d va = _mm256_set1_pd(alpha);
  auto store = [&](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_fmadd_pd(va, lo, _mm256_loadu_pd(dst)));
    _mm256_storeu_pd(dst + 4, _mm256_fmadd_pd(va, hi, _mm256_loadu_pd(dst + 4)));
  };
  store(c, c00, c01);
  store(c + ldc, c10, c11);
  store(c + 2 * ldc, c20, c21);
  store(c + 3 * ldc, c30, c31);
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t m4 = m - m % 4;
  const std::size_t n8 = n - n % 8;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      block_tn_4x8(k, alpha, a + i, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
  }
  // Remaining columns for the blocked rows, then the remaining rows.
  if (n8 < n) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* br = b + p * ldb + n8;
      for (std::size_t i = 0; i < m4; ++i) {
        const double s = alpha * a[p * lda + i];
        double* cr = c + i * ldc + n8;
        for (std::size_t j = 0; j < n - n8; ++j) cr[j] += s * br[j];
      }
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* br = b + p * ldb;
    for (std::size_t i = m4; i < m; ++i) {
      axpy_avx2(alpha * a[p * lda + i], br, c + i * ldc, n);
    }
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{dot_avx2, axpy_avx2, gemm_nn_avx2, gemm_nt_avx2,
                                 gemm_tn_avx2};
  return table;
}

}  // namespace ipp3d::simd::detail
