// Numeric kernels behind the autodiff ops.
//
// Each kernel has a serial reference implementation and an OpenMP-parallel
// one. Both compute every output element with the identical scalar reduction
// order, so the two backends agree bit-for-bit; tests/test_kernels.cpp checks
// that and tools/bench_kernels compares throughput. The parallel backend is
// the default.
#pragma once

#include <cstdint>

namespace deepssc::kern {

enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);

// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n, bool accumulate);
// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n, bool accumulate);
// C[m,n] (+)= A[k,m]^T * B[k,n]
void gemm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n, bool accumulate);

// Batched variants over g independent problems laid out contiguously.
void bgemm_nn(const double* a, const double* b, double* c, int64_t g, int64_t m,
              int64_t k, int64_t n, bool accumulate);
void bgemm_nt(const double* a, const double* b, double* c, int64_t g, int64_t m,
              int64_t k, int64_t n, bool accumulate);
void bgemm_tn(const double* a, const double* b, double* c, int64_t g, int64_t m,
              int64_t k, int64_t n, bool accumulate);

// y[i] += x[i]
void add_inplace(double* y, const double* x, int64_t n);
// y[i] += c * x[i]
void axpy(double* y, const double* x, double c, int64_t n);
// z[i] = x[i] * y[i]
void mul(const double* x, const double* y, double* z, int64_t n);
// y[i] = max(x[i], 0)
void relu_forward(const double* x, double* y, int64_t n);
// dx[i] += dy[i] * (x[i] > 0)
void relu_backward(const double* x, const double* dy, double* dx, int64_t n);
// In-place softmax over each row of x[rows, cols].
void softmax_rows(double* x, int64_t rows, int64_t cols);
// Row-wise layer norm: y = (x - mean)/sqrt(var + eps) * gamma + beta.
// Also stores per-row mean and inverse stddev for the backward pass.
void layernorm_rows(const double* x, const double* gamma, const double* beta,
                    double* y, double* mean, double* rstd, int64_t rows,
                    int64_t cols, double eps);

// Deterministic sum reductions (fixed chunking, independent of thread count).
double reduce_sum(const double* x, int64_t n);
double reduce_sumsq(const double* x, int64_t n);

}  // namespace deepssc::kern
