#pragma once

namespace partfed {

// Row-major dense kernels backing the training loop.
//
// The parallel versions distribute output rows across OpenMP threads while
// keeping the per-element accumulation order identical to the *_serial
// references, so their results are bitwise equal to the serial ones for any
// thread count. The serial versions stay as the reference for tests and for
// the kernel benchmark.

// c[m x n] = a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nn_serial(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] = a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt_serial(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] = a[k x m]^T * b[k x n]
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn_serial(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace partfed
