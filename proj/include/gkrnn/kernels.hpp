#pragma once

#include <cstddef>

namespace gkrnn::kernels {

// Dense GEMM kernels used by the cell forward/backward passes. Each kernel
// has a serial reference and an OpenMP version parallelized over output rows;
// the two produce bit-identical results because every output element is
// computed by exactly one thread with the same accumulation order.
//
// Layout: row-major. Suffixes name the operand layouts:
//   nt: C[M,N] += A[M,K] * B[N,K]^T   (activations times weight matrix)
//   nn: C[M,N] += A[M,K] * B[K,N]
//   tn: C[M,N] += A[K,M]^T * B[K,N]   (weight-gradient accumulation)

void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t k, std::size_t m, std::size_t n);

void matmul_nt_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void matmul_nn_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_parallel(const double* a, const double* b, double* c,
                        std::size_t k, std::size_t m, std::size_t n);

// Dispatching entry points: pick the OpenMP kernel once the work is large
// enough to amortize the fork, otherwise run the serial reference.
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t k, std::size_t m, std::size_t n);

// Force the serial path regardless of problem size (used by tests and the
// kernel benchmark).
void set_serial_only(bool serial_only);
bool serial_only();

}  // namespace gkrnn::kernels
