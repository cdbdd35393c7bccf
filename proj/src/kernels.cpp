#include "deepssc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace deepssc::kern {

namespace {

Backend g_backend = Backend::parallel;

// Reduction chunk count is fixed so the combine order never depends on the
// thread count.
constexpr int64_t kReduceChunks = 64;

thread_local std::vector<double> t_scratch;

}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

// ---------------------------------------------------------------------------
// gemm. All variants accumulate along k in ascending order for every C
// element, and the parallel backend only changes how rows of C are split
// across threads, so both backends agree bit-for-bit.
//
// The transposed variants materialize the transposed operand and reuse the
// nn row kernel: the j-inner loop is a streaming FMA that vectorizes without
// any reassociation.
// ---------------------------------------------------------------------------

namespace {

inline void gemm_nn_row(const double* a, const double* b, double* c, int64_t i,
                        int64_t k, int64_t n, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  const double* arow = a + i * k;
  for (int64_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b + p * n;
    for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void gemm_tn_row(const double* a, const double* b, double* c, int64_t i,
                        int64_t k, int64_t n, int64_t m, bool accumulate) {
  // C[i,:] = sum_p A[p,i] * B[p,:]
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  for (int64_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    const double* brow = b + p * n;
    for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

// dst[k, n] = src[n, k]^T
inline void transpose_into(const double* src, double* dst, int64_t rows,
                           int64_t cols) {
  // src is rows x cols; dst becomes cols x rows.
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n, bool accumulate) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) gemm_nn_row(a, b, c, i, k, n, accumulate);
  } else {
    for (int64_t i = 0; i < m; ++i) gemm_nn_row(a, b, c, i, k, n, accumulate);
  }
}

void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n, bool accumulate) {
  // b is [n, k]; run as nn against b^T.
  std::vector<double> bt(static_cast<size_t>(k) * static_cast<size_t>(n));
  transpose_into(b, bt.data(), n, k);
  gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n, bool accumulate) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) gemm_tn_row(a, b, c, i, k, n, m, accumulate);
  } else {
    for (int64_t i = 0; i < m; ++i) gemm_tn_row(a, b, c, i, k, n, m, accumulate);
  }
}

void bgemm_nn(const double* a, const double* b, double* c, int64_t g, int64_t m,
              int64_t k, int64_t n, bool accumulate) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t q = 0; q < g; ++q)
      for (int64_t i = 0; i < m; ++i)
        gemm_nn_row(a + q * m * k, b + q * k * n, c + q * m * n, i, k, n, accumulate);
  } else {
    for (int64_t q = 0; q < g; ++q)
      for (int64_t i = 0; i < m; ++i)
        gemm_nn_row(a + q * m * k, b + q * k * n, c + q * m * n, i, k, n, accumulate);
  }
}

namespace {

inline void bgemm_nt_group(const double* a, const double* b, double* c,
                           int64_t m, int64_t k, int64_t n, bool accumulate) {
  t_scratch.resize(static_cast<size_t>(k) * static_cast<size_t>(n));
  transpose_into(b, t_scratch.data(), n, k);
  for (int64_t i = 0; i < m; ++i)
    gemm_nn_row(a, t_scratch.data(), c, i, k, n, accumulate);
}

}  // namespace

void bgemm_nt(const double* a, const double* b, double* c, int64_t g, int64_t m,
              int64_t k, int64_t n, bool accumulate) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t q = 0; q < g; ++q)
      bgemm_nt_group(a + q * m * k, b + q * n * k, c + q * m * n, m, k, n, accumulate);
  } else {
    for (int64_t q = 0; q < g; ++q)
      bgemm_nt_group(a + q * m * k, b + q * n * k, c + q * m * n, m, k, n, accumulate);
  }
}

void bgemm_tn(const double* a, const double* b, double* c, int64_t g, int64_t m,
              int64_t k, int64_t n, bool accumulate) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t q = 0; q < g; ++q)
      for (int64_t i = 0; i < m; ++i)
        gemm_tn_row(a + q * k * m, b + q * k * n, c + q * m * n, i, k, n, m, accumulate);
  } else {
    for (int64_t q = 0; q < g; ++q)
      for (int64_t i = 0; i < m; ++i)
        gemm_tn_row(a + q * k * m, b + q * k * n, c + q * m * n, i, k, n, m, accumulate);
  }
}

// ---------------------------------------------------------------------------
// Elementwise.
// ---------------------------------------------------------------------------

void add_inplace(double* y, const double* x, int64_t n) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] += x[i];
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] += x[i];
  }
}

void axpy(double* y, const double* x, double c, int64_t n) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] += c * x[i];
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] += c * x[i];
  }
}

void mul(const double* x, const double* y, double* z, int64_t n) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
  } else {
    for (int64_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
  }
}

void relu_forward(const double* x, double* y, int64_t n) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

void relu_backward(const double* x, const double* dy, double* dx, int64_t n) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
      if (x[i] > 0.0) dx[i] += dy[i];
  } else {
    for (int64_t i = 0; i < n; ++i)
      if (x[i] > 0.0) dx[i] += dy[i];
  }
}

// ---------------------------------------------------------------------------
// Row-wise ops.
// ---------------------------------------------------------------------------

namespace {

inline void softmax_row(double* row, int64_t cols) {
  double mx = row[0];
  for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  const double inv = 1.0 / sum;
  for (int64_t j = 0; j < cols; ++j) row[j] *= inv;
}

inline void layernorm_row(const double* x, const double* gamma,
                          const double* beta, double* y, double* mean,
                          double* rstd, int64_t i, int64_t cols, double eps) {
  const double* xr = x + i * cols;
  double* yr = y + i * cols;
  double m = 0.0;
  for (int64_t j = 0; j < cols; ++j) m += xr[j];
  m /= static_cast<double>(cols);
  double v = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    const double d = xr[j] - m;
    v += d * d;
  }
  v /= static_cast<double>(cols);
  const double rs = 1.0 / std::sqrt(v + eps);
  for (int64_t j = 0; j < cols; ++j) yr[j] = (xr[j] - m) * rs * gamma[j] + beta[j];
  mean[i] = m;
  rstd[i] = rs;
}

}  // namespace

void softmax_rows(double* x, int64_t rows, int64_t cols) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < rows; ++i) softmax_row(x + i * cols, cols);
  } else {
    for (int64_t i = 0; i < rows; ++i) softmax_row(x + i * cols, cols);
  }
}

void layernorm_rows(const double* x, const double* gamma, const double* beta,
                    double* y, double* mean, double* rstd, int64_t rows,
                    int64_t cols, double eps) {
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < rows; ++i)
      layernorm_row(x, gamma, beta, y, mean, rstd, i, cols, eps);
  } else {
    for (int64_t i = 0; i < rows; ++i)
      layernorm_row(x, gamma, beta, y, mean, rstd, i, cols, eps);
  }
}

// ---------------------------------------------------------------------------
// Reductions. Chunked with a fixed chunk count; partial sums are combined
// serially in chunk order, so the result does not depend on the thread count.
// ---------------------------------------------------------------------------

namespace {

template <typename F>
double chunked_reduce(int64_t n, F&& chunk_sum) {
  if (n == 0) return 0.0;
  const int64_t chunks = std::min<int64_t>(kReduceChunks, n);
  const int64_t per = (n + chunks - 1) / chunks;
  double partial[kReduceChunks] = {0.0};
  if (g_backend == Backend::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < chunks; ++c) {
      const int64_t lo = c * per;
      const int64_t hi = std::min(n, lo + per);
      partial[c] = chunk_sum(lo, hi);
    }
  } else {
    for (int64_t c = 0; c < chunks; ++c) {
      const int64_t lo = c * per;
      const int64_t hi = std::min(n, lo + per);
      partial[c] = chunk_sum(lo, hi);
    }
  }
  double total = 0.0;
  for (int64_t c = 0; c < chunks; ++c) total += partial[c];
  return total;
}

}  // namespace

double reduce_sum(const double* x, int64_t n) {
  return chunked_reduce(n, [x](int64_t lo, int64_t hi) {
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += x[i];
    return s;
  });
}

double reduce_sumsq(const double* x, int64_t n) {
  return chunked_reduce(n, [x](int64_t lo, int64_t hi) {
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += x[i] * x[i];
    return s;
  });
}

}  // namespace deepssc::kern
