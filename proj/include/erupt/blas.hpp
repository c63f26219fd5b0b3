// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#ifdef ERUPT_USE_OPENBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace erupt {

// BLAS threading is pinned to 1 so results are bit-reproducible for a fixed
// worker count; parallelism happens at the batch level instead.
inline void pin_blas_threads() {
#ifdef ERUPT_USE_OPENBLAS
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
#endif
}

// C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C.
// A and B are row-major; when a transpose flag is set the stored matrix is
// the transpose of the operand ([k,m] resp. [n,k]).
template <class T>
void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* A,
          const T* B, T beta, T* C);

#ifdef ERUPT_USE_OPENBLAS

template <>
inline void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha,
                        const float* A, const float* B, float beta, float* C) {
  pin_blas_threads();
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, A, ta ? m : k, B,
              tb ? k : n, beta, C, n);
}

template <>
inline void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha,
                         const double* A, const double* B, double beta,
                         double* C) {
  pin_blas_threads();
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, A, ta ? m : k, B,
              tb ? k : n, beta, C, n);
}

#else

// Portable fallback: fixed i-k-j loop order, deterministic.
template <class T>
void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* A,
          const T* B, T beta, T* C) {
  auto a_at = [&](int i, int l) { return ta ? A[l * m + i] : A[i * k + l]; };
  auto b_at = [&](int l, int j) { return tb ? B[j * k + l] : B[l * n + j]; };
  for (int i = 0; i < m; ++i) {
    T* c_row = C + static_cast<std::int64_t>(i) * n;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) c_row[j] = T(0);
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) c_row[j] *= beta;
    }
    for (int l = 0; l < k; ++l) {
      const T a = alpha * a_at(i, l);
      if (!tb) {
        const T* b_row = B + static_cast<std::int64_t>(l) * n;
        for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
      } else {
        for (int j = 0; j < n; ++j) c_row[j] += a * b_at(l, j);
      }
    }
  }
}

#endif

}  // namespace erupt
