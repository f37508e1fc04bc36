#include "tgnseal/kernels.hpp"

#if defined(TGNSEAL_HAVE_AVX2)

#include <immintrin.h>

namespace tgnseal::kernels {
namespace {

constexpr std::size_t kLanes = 4;

// Register-blocked over 4 rows x 8 columns. Every output element is still
// 0 + a[i][0]*b[0][j] + a[i][1]*b[1][j] + ... in k order, exactly as in the
// scalar kernel; mul + add, never fmadd.
inline double dot_column(const double* a_row, const double* b, std::size_t j, std::size_t k,
                         std::size_t m) {
  double acc = 0.0;
  for (std::size_t kk = 0; kk < k; ++kk) acc += a_row[kk] * b[kk * m + j];
  return acc;
}

void matmul_avx2(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m) {
  const std::size_t m8 = m - m % 8;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t j = 0; j < m8; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      for (std::size_t kk = 0; kk < k; ++kk) {
        const __m256d b0 = _mm256_loadu_pd(b + kk * m + j);
        const __m256d b1 = _mm256_loadu_pd(b + kk * m + j + 4);
        __m256d x = _mm256_set1_pd(a0[kk]);
        c00 = _mm256_add_pd(c00, _mm256_mul_pd(x, b0));
        c01 = _mm256_add_pd(c01, _mm256_mul_pd(x, b1));
        x = _mm256_set1_pd(a1[kk]);
        c10 = _mm256_add_pd(c10, _mm256_mul_pd(x, b0));
        c11 = _mm256_add_pd(c11, _mm256_mul_pd(x, b1));
        x = _mm256_set1_pd(a2[kk]);
        c20 = _mm256_add_pd(c20, _mm256_mul_pd(x, b0));
        c21 = _mm256_add_pd(c21, _mm256_mul_pd(x, b1));
        x = _mm256_set1_pd(a3[kk]);
        c30 = _mm256_add_pd(c30, _mm256_mul_pd(x, b0));
        c31 = _mm256_add_pd(c31, _mm256_mul_pd(x, b1));
      }
      double* r = c + i * m + j;
      _mm256_storeu_pd(r, c00);
      _mm256_storeu_pd(r + 4, c01);
      _mm256_storeu_pd(r + m, c10);
      _mm256_storeu_pd(r + m + 4, c11);
      _mm256_storeu_pd(r + 2 * m, c20);
      _mm256_storeu_pd(r + 2 * m + 4, c21);
      _mm256_storeu_pd(r + 3 * m, c30);
      _mm256_storeu_pd(r + 3 * m + 4, c31);
    }
    for (std::size_t j = m8; j < m; ++j) {
      c[i * m + j] = dot_column(a0, b, j, k, m);
      c[(i + 1) * m + j] = dot_column(a1, b, j, k, m);
      c[(i + 2) * m + j] = dot_column(a2, b, j, k, m);
      c[(i + 3) * m + j] = dot_column(a3, b, j, k, m);
    }
  }
  for (; i < n; ++i) {
    const double* a0 = a + i * k;
    for (std::size_t j = 0; j < m8; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      for (std::size_t kk = 0; kk < k; ++kk) {
        const __m256d x = _mm256_set1_pd(a0[kk]);
        c00 = _mm256_add_pd(c00, _mm256_mul_pd(x, _mm256_loadu_pd(b + kk * m + j)));
        c01 = _mm256_add_pd(c01, _mm256_mul_pd(x, _mm256_loadu_pd(b + kk * m + j + 4)));
      }
      _mm256_storeu_pd(c + i * m + j, c00);
      _mm256_storeu_pd(c + i * m + j + 4, c01);
    }
    for (std::size_t j = m8; j < m; ++j) c[i * m + j] = dot_column(a0, b, j, k, m);
  }
}

void accumulate_avx2(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a_vec = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d prod = _mm256_mul_pd(a_vec, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d a_vec = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), a_vec));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{matmul_avx2, accumulate_avx2, axpy_avx2,
                                 add_avx2,    mul_avx2,        scale_avx2};
  return cpu_has_avx2() ? &table : nullptr;
}

}  // namespace tgnseal::kernels

#else

namespace tgnseal::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace tgnseal::kernels

#endif
