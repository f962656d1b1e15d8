#pragma once

#include <cstddef>

namespace odil::linalg {

// Row-major matrix products used by the conv/dense layers. C is overwritten.

// C[M,N] = A[M,K] * B[K,N]
void gemm_nn(std::size_t M, std::size_t N, std::size_t K,
             const double* A, const double* B, double* C);

// C[M,N] = A^T * B where A is [K,M], B is [K,N]
void gemm_tn(std::size_t M, std::size_t N, std::size_t K,
             const double* A, const double* B, double* C);

// C[M,N] = A * B^T where A is [M,K], B is [N,K]
void gemm_nt(std::size_t M, std::size_t N, std::size_t K,
             const double* A, const double* B, double* C);

}  // namespace odil::linalg
