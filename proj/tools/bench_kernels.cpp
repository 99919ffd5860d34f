// Compares the serial reference kernels against the OpenMP versions and
// checks that both produce bitwise-identical output while timing them.

#include <cstdio>
#include <cstring>
#include <omp.h>
#include <vector>

#include "partfed/kernels.hpp"
#include "partfed/rng.hpp"

namespace {

using Kernel = void (*)(const double*, const double*, double*, int, int, int);

double time_kernel(Kernel fn, const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, int m, int k, int n, int reps) {
    fn(a.data(), b.data(), c.data(), m, k, n);  // warm-up
    const double t0 = omp_get_wtime();
    for (int r = 0; r < reps; ++r) fn(a.data(), b.data(), c.data(), m, k, n);
    return (omp_get_wtime() - t0) / reps;
}

void bench_pair(const char* name, Kernel serial, Kernel parallel, int m, int k, int n, int reps) {
    partfed::Rng rng(42);
    std::vector<double> a(static_cast<size_t>(m) * k), b, c_serial, c_parallel;
    // Operand shapes differ per kernel family; size b generously.
    b.resize(static_cast<size_t>(k) * n + static_cast<size_t>(n) * k +
             static_cast<size_t>(k) * m);
    c_serial.assign(static_cast<size_t>(m) * n, 0.0);
    c_parallel.assign(static_cast<size_t>(m) * n, 0.0);
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);

    const double ts = time_kernel(serial, a, b, c_serial, m, k, n, reps);
    const double tp = time_kernel(parallel, a, b, c_parallel, m, k, n, reps);
    const bool identical =
        std::memcmp(c_serial.data(), c_parallel.data(), c_serial.size() * sizeof(double)) == 0;
    std::printf("%-8s m=%-4d k=%-4d n=%-4d  serial %8.3f ms  omp %8.3f ms  speedup %5.2fx  %s\n",
                name, m, k, n, ts * 1e3, tp * 1e3, ts / tp,
                identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    const int reps = 5;
    // The shapes the training loop actually runs: batch x fan_in x fan_out.
    const int shapes[][3] = {{64, 785, 500}, {64, 500, 100}, {256, 128, 64}, {512, 512, 512}};
    for (const auto& s : shapes) {
        bench_pair("gemm_nn", partfed::gemm_nn_serial, partfed::gemm_nn, s[0], s[1], s[2], reps);
        bench_pair("gemm_nt", partfed::gemm_nt_serial, partfed::gemm_nt, s[0], s[1], s[2], reps);
        bench_pair("gemm_tn", partfed::gemm_tn_serial, partfed::gemm_tn, s[0], s[1], s[2], reps);
    }
    return 0;
}
