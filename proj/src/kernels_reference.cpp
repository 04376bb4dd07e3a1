#include "tpaoi/kernels.hpp"

#include <cstddef>

namespace tpaoi::kernels::reference {

void gemm_accumulate(const GemmArgs& g) {
  for (int i = 0; i < g.m; ++i) {
    for (int j = 0; j < g.n; ++j) {
      double sum = 0.0;
      for (int p = 0; p < g.k; ++p) sum += g.a[i * g.lda + p] * g.b[p * g.ldb + j];
      g.c[i * g.ldc + j] += sum;
    }
  }
}

void transpose(std::span<const double> in, int rows, int cols, std::span<double> out) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
}

}  // namespace tpaoi::kernels::reference
