#include "tgnseal/kernels.hpp"

namespace tgnseal::kernels {
namespace {

// i-k-j order: each c[i][j] accumulates over k ascending starting from 0.0.
void matmul_scalar(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                   std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* c_row = c + i * m;
    for (std::size_t j = 0; j < m; ++j) c_row[j] = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double a_ik = a[i * k + kk];
      const double* b_row = b + kk * m;
      for (std::size_t j = 0; j < m; ++j) c_row[j] += a_ik * b_row[j];
    }
  }
}

void accumulate_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{matmul_scalar, accumulate_scalar, axpy_scalar,
                                 add_scalar,    mul_scalar,        scale_scalar};
  return table;
}

}  // namespace tgnseal::kernels
