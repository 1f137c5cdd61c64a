#include "mapnav/tensor/kernels.hpp"

#include <cstdlib>
#include <string>
#include <vector>

namespace mapnav::kernels {
namespace {

const KernelTable* select_from_env() {
  const char* env = std::getenv("MAPNAV_ISA");
  if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = select_from_env();
  return table;
}

thread_local std::vector<double> transpose_scratch;

// dst[cols x rows] = src[rows x cols]^T
void transpose_into(std::vector<double>& dst, const double* src, std::size_t rows,
                    std::size_t cols) {
  if (dst.size() < rows * cols) dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

}  // namespace

const KernelTable& active() { return *current(); }

Isa active_isa() { return current()->isa; }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool force_isa(Isa isa) {
  if (isa == Isa::Scalar) {
    current() = &scalar_table();
    return true;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) return false;
  current() = t;
  return true;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  transpose_into(transpose_scratch, b, n, k);
  active().gemm_nn(m, n, k, a, transpose_scratch.data(), c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  transpose_into(transpose_scratch, a, m, k);
  active().gemm_nn(k, n, m, transpose_scratch.data(), b, c);
}

}  // namespace mapnav::kernels
