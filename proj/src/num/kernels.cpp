#include "rclab/num/kernels.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace rclab::num::kernels {

namespace {

constexpr std::size_t kRows = 4;
constexpr std::size_t kCols = 64;

// Accumulates a kRows x kCols tile of c from kRows rows of a over all k.
// `cols` may be smaller than kCols at the right edge.
template <bool Accumulate, class Real>
inline void tile(std::size_t k, std::size_t n, std::size_t cols, const Real* a0, const Real* a1,
                 const Real* a2, const Real* a3, const Real* b, Real* c0, Real* c1, Real* c2,
                 Real* c3) {
  alignas(64) Real acc[kRows][kCols] = {};
  if (cols == kCols) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real* bp = b + p * n;
      const Real x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
#pragma GCC ivdep
      for (std::size_t j = 0; j < kCols; ++j) {
        const Real bv = bp[j];
        acc[0][j] += x0 * bv;
        acc[1][j] += x1 * bv;
        acc[2][j] += x2 * bv;
        acc[3][j] += x3 * bv;
      }
    }
  } else {
    for (std::size_t p = 0; p < k; ++p) {
      const Real* bp = b + p * n;
      const Real x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      for (std::size_t j = 0; j < cols; ++j) {
        const Real bv = bp[j];
        acc[0][j] += x0 * bv;
        acc[1][j] += x1 * bv;
        acc[2][j] += x2 * bv;
        acc[3][j] += x3 * bv;
      }
    }
  }
  if constexpr (Accumulate) {
    for (std::size_t j = 0; j < cols; ++j) {
      c0[j] += acc[0][j];
      c1[j] += acc[1][j];
      c2[j] += acc[2][j];
      c3[j] += acc[3][j];
    }
  } else {
    std::copy_n(acc[0], cols, c0);
    std::copy_n(acc[1], cols, c1);
    std::copy_n(acc[2], cols, c2);
    std::copy_n(acc[3], cols, c3);
  }
}

template <bool Accumulate, class Real>
void gemm_rows(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  // Leftover rows go through a zero-padded block so that every row takes the
  // identical arithmetic path.
  std::vector<Real> pad_a;
  std::vector<Real> pad_c;
  for (std::size_t i = 0; i < m; i += kRows) {
    const Real* ab = a + i * k;
    Real* cb = c + i * n;
    const std::size_t rows = std::min(kRows, m - i);
    if (rows < kRows) {
      pad_a.assign(kRows * k, Real{0});
      std::copy_n(ab, rows * k, pad_a.begin());
      pad_c.assign(kRows * n, Real{0});
      if constexpr (Accumulate) std::copy_n(cb, rows * n, pad_c.begin());
      ab = pad_a.data();
      cb = pad_c.data();
    }
    for (std::size_t j = 0; j < n; j += kCols) {
      const std::size_t cols = std::min(kCols, n - j);
      tile<Accumulate>(k, n, cols, ab, ab + k, ab + 2 * k, ab + 3 * k, b + j, cb + j, cb + n + j,
                       cb + 2 * n + j, cb + 3 * n + j);
    }
    if (rows < kRows) std::copy_n(pad_c.begin(), rows * n, c + i * n);
  }
}

}  // namespace

template <class Real>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  gemm_rows<false>(m, k, n, a, b, c);
}

template <class Real>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  std::vector<Real> bt(k * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + r] = b[r * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c);
}

template <class Real>
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  std::vector<Real> at(k * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  }
  gemm_rows<true>(k, m, n, at.data(), b, c);
}

template void gemm_nn<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
template void gemm_nn<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
template void gemm_nt<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
template void gemm_nt<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
template void gemm_tn_acc<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
template void gemm_tn_acc<double>(std::size_t, std::size_t, std::size_t, const double*, const double*,
                                  double*);

}  // namespace rclab::num::kernels
