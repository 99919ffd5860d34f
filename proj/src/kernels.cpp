#include "partfed/kernels.hpp"

#include <cstring>

namespace partfed {

// The accumulation order per output element is t = 0..k-1 in every variant.
// Store/load of an IEEE double is exact, so accumulating into c[] directly
// gives the same result as a scalar accumulator.

void gemm_nn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(double) * static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int t = 0; t < k; ++t) {
            const double ait = a[static_cast<size_t>(i) * k + t];
            const double* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += ait * bt[j];
        }
    }
}

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int t = 0; t < k; ++t) {
            const double ait = a[static_cast<size_t>(i) * k + t];
            const double* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += ait * bt[j];
        }
    }
}

void gemm_nt_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
            ci[j] = acc;
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
            ci[j] = acc;
        }
    }
}

void gemm_tn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(double) * static_cast<size_t>(m) * n);
    for (int t = 0; t < k; ++t) {
        const double* at = a + static_cast<size_t>(t) * m;
        const double* bt = b + static_cast<size_t>(t) * n;
        for (int i = 0; i < m; ++i) {
            const double ati = at[i];
            double* ci = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += ati * bt[j];
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int t = 0; t < k; ++t) {
            const double ati = a[static_cast<size_t>(t) * m + i];
            const double* bt = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) ci[j] += ati * bt[j];
        }
    }
}

}  // namespace partfed
