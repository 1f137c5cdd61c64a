#pragma once

// Dense fp64 inner-loop kernels. Every routine exists as a portable scalar
// reference and, on x86-64 hosts with AVX2+FMA, as a vectorized variant.
// The active table is chosen once at startup from CPUID and can be pinned
// with MAPNAV_ISA=scalar|avx2 or force_isa() (tests use the latter to
// compare the two paths).

#include <cstddef>
#include <string_view>

namespace mapnav::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // C[m x n] += A[m x k] * B[k x n], all row-major and densely packed.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
};

const KernelTable& scalar_table();

/// nullptr when the host CPU (or the compiler) lacks AVX2+FMA.
const KernelTable* avx2_table();

const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Pins the dispatch table. Returns false (and changes nothing) if the
/// requested ISA is not available on this host.
bool force_isa(Isa isa);

inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }

/// C += A * B
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  active().gemm_nn(m, n, k, a, b, c);
}

/// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

/// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

}  // namespace mapnav::kernels
