#pragma once

#include <span>

namespace tpaoi::kernels {

// Row-major matrix views used by the dense-layer math.
// C (m x n) += A (m x k) * B (k x n); leading dimensions are row strides.
struct GemmArgs {
  int m = 0;
  int n = 0;
  int k = 0;
  const double* a = nullptr;
  int lda = 0;
  const double* b = nullptr;
  int ldb = 0;
  double* c = nullptr;
  int ldc = 0;
};

// Register-blocked kernel, parallelised over row blocks with OpenMP.
void gemm_accumulate(const GemmArgs& args);

// out (cols x rows) = in (rows x cols)^T
void transpose(std::span<const double> in, int rows, int cols, std::span<double> out);

// y[r][:] = bias for every row r
void broadcast_rows(std::span<const double> bias, int rows, std::span<double> y);

// db[:] += sum over rows of dy
void column_sums_accumulate(std::span<const double> dy, int rows, int cols, std::span<double> db);

void relu_inplace(std::span<double> y);

// dy[i] = 0 where the layer output y[i] <= 0
void relu_backward_inplace(std::span<const double> y, std::span<double> dy);

// Straightforward serial versions kept as the test oracle for the kernels above.
namespace reference {
void gemm_accumulate(const GemmArgs& args);
void transpose(std::span<const double> in, int rows, int cols, std::span<double> out);
}  // namespace reference

int max_threads();

}  // namespace tpaoi::kernels
