#include <cstddef>

#include "tpaoi/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpaoi::kernels {

namespace {

constexpr int kBlockRows = 4;
constexpr int kBlockCols = 32;
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelThreshold = 1L << 16;

// C tile (R x kBlockCols) is held in registers across the whole k loop.
template <int R>
inline void full_tile(const GemmArgs& g, int i0, int j0) {
  double acc[R][kBlockCols];
  for (int r = 0; r < R; ++r) {
    const double* crow = g.c + static_cast<std::ptrdiff_t>(i0 + r) * g.ldc + j0;
#pragma omp simd
    for (int c = 0; c < kBlockCols; ++c) acc[r][c] = crow[c];
  }
  for (int p = 0; p < g.k; ++p) {
    const double* brow = g.b + static_cast<std::ptrdiff_t>(p) * g.ldb + j0;
    for (int r = 0; r < R; ++r) {
      const double av = g.a[static_cast<std::ptrdiff_t>(i0 + r) * g.lda + p];
#pragma omp simd
      for (int c = 0; c < kBlockCols; ++c) acc[r][c] += av * brow[c];
    }
  }
  for (int r = 0; r < R; ++r) {
    double* crow = g.c + static_cast<std::ptrdiff_t>(i0 + r) * g.ldc + j0;
#pragma omp simd
    for (int c = 0; c < kBlockCols; ++c) crow[c] = acc[r][c];
  }
}

template <int R>
inline void edge_tile(const GemmArgs& g, int i0, int j0, int width) {
  double acc[R][kBlockCols];
  for (int r = 0; r < R; ++r) {
    const double* crow = g.c + static_cast<std::ptrdiff_t>(i0 + r) * g.ldc + j0;
    for (int c = 0; c < width; ++c) acc[r][c] = crow[c];
  }
  for (int p = 0; p < g.k; ++p) {
    const double* brow = g.b + static_cast<std::ptrdiff_t>(p) * g.ldb + j0;
    for (int r = 0; r < R; ++r) {
      const double av = g.a[static_cast<std::ptrdiff_t>(i0 + r) * g.lda + p];
#pragma omp simd
      for (int c = 0; c < width; ++c) acc[r][c] += av * brow[c];
    }
  }
  for (int r = 0; r < R; ++r) {
    double* crow = g.c + static_cast<std::ptrdiff_t>(i0 + r) * g.ldc + j0;
    for (int c = 0; c < width; ++c) crow[c] = acc[r][c];
  }
}

template <int R>
inline void tile(const GemmArgs& g, int i0, int j0) {
  const int width = g.n - j0 < kBlockCols ? g.n - j0 : kBlockCols;
  if (width == kBlockCols) {
    full_tile<R>(g, i0, j0);
  } else {
    edge_tile<R>(g, i0, j0, width);
  }
}

}  // namespace

void gemm_accumulate(const GemmArgs& g) {
  if (g.m <= 0 || g.n <= 0 || g.k <= 0) return;
  const int row_blocks = (g.m + kBlockRows - 1) / kBlockRows;
  const int col_blocks = (g.n + kBlockCols - 1) / kBlockCols;
  const int tasks = row_blocks * col_blocks;
  const long work = static_cast<long>(g.m) * g.n * g.k;

#pragma omp parallel for schedule(static) if (work >= kParallelThreshold)
  for (int t = 0; t < tasks; ++t) {
    const int i0 = (t / col_blocks) * kBlockRows;
    const int j0 = (t % col_blocks) * kBlockCols;
    switch (g.m - i0 < kBlockRows ? g.m - i0 : kBlockRows) {
      case 4: tile<4>(g, i0, j0); break;
      case 3: tile<3>(g, i0, j0); break;
      case 2: tile<2>(g, i0, j0); break;
      default: tile<1>(g, i0, j0); break;
    }
  }
}

void transpose(std::span<const double> in, int rows, int cols, std::span<double> out) {
  constexpr int kTile = 16;
#pragma omp parallel for schedule(static) if (static_cast<long>(rows) * cols >= kParallelThreshold)
  for (int r0 = 0; r0 < rows; r0 += kTile) {
    for (int c0 = 0; c0 < cols; c0 += kTile) {
      const int r1 = r0 + kTile < rows ? r0 + kTile : rows;
      const int c1 = c0 + kTile < cols ? c0 + kTile : cols;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c)
          out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
    }
  }
}

void broadcast_rows(std::span<const double> bias, int rows, std::span<double> y) {
  const auto cols = bias.size();
  for (int r = 0; r < rows; ++r) {
    double* yr = y.data() + static_cast<std::size_t>(r) * cols;
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) yr[c] = bias[c];
  }
}

void column_sums_accumulate(std::span<const double> dy, int rows, int cols, std::span<double> db) {
  for (int r = 0; r < rows; ++r) {
    const double* dr = dy.data() + static_cast<std::size_t>(r) * cols;
#pragma omp simd
    for (int c = 0; c < cols; ++c) db[c] += dr[c];
  }
}

void relu_inplace(std::span<double> y) {
#pragma omp simd
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
}

void relu_backward_inplace(std::span<const double> y, std::span<double> dy) {
#pragma omp simd
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = y[i] > 0.0 ? dy[i] : 0.0;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace tpaoi::kernels
