#pragma once

// In-core tile primitives on row-major tiles. This is the boundary an
// accelerator backend would replace; scheduling code only calls these.

#include <cblas.h>
#include <lapacke.h>

namespace falkon::ooc::backend {

// Row-major lower storage is column-major upper storage of the same memory,
// so LAPACK is called in column-major mode with the triangle flipped. That
// avoids the transposition copies LAPACKE makes for row-major input.

inline int potrf_lower(int n, double* a, int lda) {
  return LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'U', n, a, lda);
}
inline int potrf_lower(int n, float* a, int lda) {
  return LAPACKE_spotrf(LAPACK_COL_MAJOR, 'U', n, a, lda);
}

/// a <- upper(U U^T) for upper-triangular U.
inline int lauum_upper(int n, double* a, int lda) {
  return LAPACKE_dlauum(LAPACK_COL_MAJOR, 'L', n, a, lda);
}
inline int lauum_upper(int n, float* a, int lda) {
  return LAPACKE_slauum(LAPACK_COL_MAJOR, 'L', n, a, lda);
}

/// b (m x n) <- b L^{-T}, L lower n x n.
inline void trsm_right_lower_trans(int m, int n, const double* l, int ldl, double* b, int ldb) {
  cblas_dtrsm(CblasRowMajor, CblasRight, CblasLower, CblasTrans, CblasNonUnit, m, n, 1.0, l, ldl,
              b, ldb);
}
inline void trsm_right_lower_trans(int m, int n, const float* l, int ldl, float* b, int ldb) {
  cblas_strsm(CblasRowMajor, CblasRight, CblasLower, CblasTrans, CblasNonUnit, m, n, 1.0f, l, ldl,
              b, ldb);
}

/// b (m x n) <- A^{-1} b, A n-side triangular (m x m), no transpose.
inline void trsm_left(bool lower, int m, int n, const double* a, int lda, double* b, int ldb) {
  cblas_dtrsm(CblasRowMajor, CblasLeft, lower ? CblasLower : CblasUpper, CblasNoTrans,
              CblasNonUnit, m, n, 1.0, a, lda, b, ldb);
}
inline void trsm_left(bool lower, int m, int n, const float* a, int lda, float* b, int ldb) {
  cblas_strsm(CblasRowMajor, CblasLeft, lower ? CblasLower : CblasUpper, CblasNoTrans,
              CblasNonUnit, m, n, 1.0f, a, lda, b, ldb);
}

/// e <- alpha c c^T + beta e on the chosen triangle; c is n x k.
inline void syrk(bool lower, int n, int k, double alpha, const double* c, int ldc, double beta,
                 double* e, int lde) {
  cblas_dsyrk(CblasRowMajor, lower ? CblasLower : CblasUpper, CblasNoTrans, n, k, alpha, c, ldc,
              beta, e, lde);
}
inline void syrk(bool lower, int n, int k, float alpha, const float* c, int ldc, float beta,
                 float* e, int lde) {
  cblas_ssyrk(CblasRowMajor, lower ? CblasLower : CblasUpper, CblasNoTrans, n, k, alpha, c, ldc,
              beta, e, lde);
}

/// c (m x n) <- alpha a b^T + beta c; a is m x k, b is n x k.
inline void gemm_nt(int m, int n, int k, double alpha, const double* a, int lda, const double* b,
                    int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, alpha, a, lda, b, ldb, beta, c,
              ldc);
}
inline void gemm_nt(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                    int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, alpha, a, lda, b, ldb, beta, c,
              ldc);
}

/// c (m x n) <- alpha a b + beta c; a is m x k, b is k x n.
inline void gemm_nn(int m, int n, int k, double alpha, const double* a, int lda, const double* b,
                    int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c,
              ldc);
}
inline void gemm_nn(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                    int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c,
              ldc);
}

/// b (m x n) <- b U^T, U upper n x n.
inline void trmm_right_upper_trans(int m, int n, const double* u, int ldu, double* b, int ldb) {
  cblas_dtrmm(CblasRowMajor, CblasRight, CblasUpper, CblasTrans, CblasNonUnit, m, n, 1.0, u, ldu,
              b, ldb);
}
inline void trmm_right_upper_trans(int m, int n, const float* u, int ldu, float* b, int ldb) {
  cblas_strmm(CblasRowMajor, CblasRight, CblasUpper, CblasTrans, CblasNonUnit, m, n, 1.0f, u, ldu,
              b, ldb);
}

/// Pins the BLAS library to one thread; parallelism comes from our workers.
void init_single_threaded();

}  // namespace falkon::ooc::backend
