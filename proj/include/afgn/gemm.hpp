#pragma once

#include <cstddef>
#include <vector>

#include "afgn/parallel.hpp"

namespace afgn {

namespace detail {
constexpr int kGemmPackA = 100;
constexpr int kGemmPackB = 101;
constexpr int kGemmTranspose = 102;
}  // namespace detail

// Dense row-major matrix multiply: C[M,N] = A[M,K] * B[K,N], accumulating
// into C when `accumulate` is set. Both operands are repacked into
// register-tile panels so the microkernel streams contiguous memory and
// compiles to broadcast-FMA. Accumulation order per element is fixed, so
// results are bit-reproducible regardless of the caller's threading.
template <typename T>
void gemm(bool accumulate, size_t M, size_t N, size_t K, const T* A,
          const T* B, T* C) {
  constexpr size_t MR = 4;
  constexpr size_t NR = 32;
  if (M == 0 || N == 0) return;
  if (K == 0) {
    if (!accumulate)
      for (size_t i = 0; i < M * N; ++i) C[i] = T(0);
    return;
  }

  size_t mstrips = (M + MR - 1) / MR;
  size_t nstrips = (N + NR - 1) / NR;

  // A panels: [mstrip][k][MR], zero-padded rows.
  std::vector<T>& ap = tls_scratch<T, detail::kGemmPackA>(mstrips * K * MR);
  for (size_t ms = 0; ms < mstrips; ++ms) {
    size_t mt = (M - ms * MR < MR) ? (M - ms * MR) : MR;
    T* panel = ap.data() + ms * K * MR;
    for (size_t k = 0; k < K; ++k) {
      T* dst = panel + k * MR;
      for (size_t im = 0; im < mt; ++im) dst[im] = A[(ms * MR + im) * K + k];
      for (size_t im = mt; im < MR; ++im) dst[im] = T(0);
    }
  }

  // One B panel at a time: [k][NR], zero-padded columns.
  std::vector<T>& bp = tls_scratch<T, detail::kGemmPackB>(K * NR);
  for (size_t ns = 0; ns < nstrips; ++ns) {
    size_t n0 = ns * NR;
    size_t nt = (N - n0 < NR) ? (N - n0) : NR;
    for (size_t k = 0; k < K; ++k) {
      const T* src = B + k * N + n0;
      T* dst = bp.data() + k * NR;
      for (size_t in = 0; in < nt; ++in) dst[in] = src[in];
      for (size_t in = nt; in < NR; ++in) dst[in] = T(0);
    }

    for (size_t ms = 0; ms < mstrips; ++ms) {
      const T* panel = ap.data() + ms * K * MR;
      T acc[MR][NR] = {};
      const T* b = bp.data();
      for (size_t k = 0; k < K; ++k, b += NR) {
        const T* a = panel + k * MR;
        for (size_t im = 0; im < MR; ++im) {
          T av = a[im];
          T* row = acc[im];
          for (size_t in = 0; in < NR; ++in) row[in] += av * b[in];
        }
      }
      size_t m0 = ms * MR;
      size_t mt = (M - m0 < MR) ? (M - m0) : MR;
      for (size_t im = 0; im < mt; ++im) {
        T* c = C + (m0 + im) * N + n0;
        if (accumulate) {
          for (size_t in = 0; in < nt; ++in) c[in] += acc[im][in];
        } else {
          for (size_t in = 0; in < nt; ++in) c[in] = acc[im][in];
        }
      }
    }
  }
}

// C[M,N] (+)= A^T * B where A is stored [K,M] row-major.
template <typename T>
void gemm_at(bool accumulate, size_t M, size_t N, size_t K, const T* A,
             const T* B, T* C) {
  std::vector<T>& at = tls_scratch<T, detail::kGemmTranspose>(M * K);
  for (size_t k = 0; k < K; ++k)
    for (size_t m = 0; m < M; ++m) at[m * K + k] = A[k * M + m];
  gemm(accumulate, M, N, K, at.data(), B, C);
}

// C[M,N] (+)= A * B^T where B is stored [N,K] row-major.
template <typename T>
void gemm_bt(bool accumulate, size_t M, size_t N, size_t K, const T* A,
             const T* B, T* C) {
  std::vector<T>& bt = tls_scratch<T, detail::kGemmTranspose>(K * N);
  for (size_t n = 0; n < N; ++n)
    for (size_t k = 0; k < K; ++k) bt[k * N + n] = B[n * K + k];
  gemm(accumulate, M, N, K, A, bt.data(), C);
}

}  // namespace afgn
