#pragma once

// Thin wrappers around Eigen matrix products. Everything in this project is
// row-major and single-threaded; Eigen supplies the vectorized kernels only.

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace advlab {

template <class S>
using MatMap =
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// C[m,n] = A[m,k] * B[k,n]   (or += when accumulate)
template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false) {
    ConstMatMap<S> A(a, m, k), B(b, k, n);
    MatMap<S> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

// C[m,n] = A^T * B with A stored as [k,m]
template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false) {
    ConstMatMap<S> A(a, k, m), B(b, k, n);
    MatMap<S> C(c, m, n);
    if (accumulate)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
}

// C[m,n] = A * B^T with B stored as [n,k]
template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false) {
    ConstMatMap<S> A(a, m, k), B(b, n, k);
    MatMap<S> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
}

}  // namespace advlab
