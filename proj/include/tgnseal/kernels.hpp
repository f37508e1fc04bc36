#pragma once

// Dense float64 inner loops used by the autograd engine.
//
// Every kernel exists as a scalar reference and, where the CPU supports it,
// an AVX2 variant. Both variants perform the same operations in the same
// order per output element (no FMA, no reassociation of reductions), so they
// agree bit for bit. The active variant is chosen once at startup from CPUID
// and can be overridden with TGNSEAL_ISA=scalar|avx2 or set_isa().

#include <cstddef>
#include <string_view>

namespace tgnseal::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  // c[n x m] = a[n x k] * b[k x m], all row-major; c is overwritten.
  void (*matmul)(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m);
  // y[i] += x[i]
  void (*accumulate)(const double* x, double* y, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = x[i] + y[i]
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  // out[i] = x[i] * y[i]
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_table();

bool cpu_has_avx2();
Isa active_isa();
/// Throws ConfigError if the requested ISA is unavailable.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

const KernelTable& active();

inline void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                   std::size_t m) {
  active().matmul(a, b, c, n, k, m);
}
inline void accumulate(const double* x, double* y, std::size_t n) { active().accumulate(x, y, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void add(const double* x, const double* y, double* out, std::size_t n) {
  active().add(x, y, out, n);
}
inline void mul(const double* x, const double* y, double* out, std::size_t n) {
  active().mul(x, y, out, n);
}
inline void scale(double alpha, double* x, std::size_t n) { active().scale(alpha, x, n); }

}  // namespace tgnseal::kernels
