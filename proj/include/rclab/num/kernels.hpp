#pragma once

#include <cstddef>

namespace rclab::num::kernels {

// Row-major matrix products. Every output element is accumulated over the
// inner dimension in ascending order by the same code path regardless of the
// row count, so a row's result never depends on which batch it sits in.

// c[m,n] = a[m,k] * b[k,n]
template <class Real>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c);

// c[m,n] = a[m,k] * b[n,k]^T
template <class Real>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c);

// c[k,n] += a[m,k]^T * b[m,n]
template <class Real>
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c);

}  // namespace rclab::num::kernels
