#pragma once

// Dense matrix-product kernels. Each product has a serial reference and an
// OpenMP version. Every output element is produced by exactly one thread with a
// fixed inner summation order, so both versions are bit-identical for any
// thread count.

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dtii::kernels {

// Below this many multiply-adds the parallel region costs more than it saves.
inline constexpr long kParallelWork = 1L << 15;

inline bool worth_parallel(long work) {
#ifdef _OPENMP
  return work >= kParallelWork && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

namespace serial {

/// c[m,n] (+)= a[m,k] * b[k,n]
template <class T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) ci[j] = T{0};
    const T* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

/// c[k,n] (+)= a[m,k]^T * g[m,n]
template <class T>
void gemm_tn(int m, int n, int k, const T* a, const T* g, T* c, bool accumulate) {
  for (int p = 0; p < k; ++p) {
    T* cp = c + static_cast<std::size_t>(p) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) cp[j] = T{0};
    for (int i = 0; i < m; ++i) {
      const T av = a[static_cast<std::size_t>(i) * k + p];
      const T* gi = g + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

/// b[k,n] -> bt[n,k]
template <class T>
std::vector<T> transpose(int k, int n, const T* b) {
  std::vector<T> bt(static_cast<std::size_t>(k) * n);
  for (int p = 0; p < k; ++p)
    for (int j = 0; j < n; ++j) bt[static_cast<std::size_t>(j) * k + p] = b[static_cast<std::size_t>(p) * n + j];
  return bt;
}

/// Row i of g[m,n] * b[k,n]^T, with b given transposed as bt[n,k]. Each output
/// sums over j in increasing order before being added to c.
template <class T>
void gemm_nt_row(int n, int k, const T* gi, const T* bt, T* ci, T* scratch, bool accumulate) {
  for (int p = 0; p < k; ++p) scratch[p] = T{0};
  for (int j = 0; j < n; ++j) {
    const T gv = gi[j];
    const T* row = bt + static_cast<std::size_t>(j) * k;
    for (int p = 0; p < k; ++p) scratch[p] += gv * row[p];
  }
  for (int p = 0; p < k; ++p) ci[p] = accumulate ? ci[p] + scratch[p] : scratch[p];
}

/// c[m,k] (+)= g[m,n] * b[k,n]^T
template <class T>
void gemm_nt(int m, int n, int k, const T* g, const T* b, T* c, bool accumulate) {
  const auto bt = transpose(k, n, b);
  std::vector<T> scratch(k);
  for (int i = 0; i < m; ++i)
    gemm_nt_row(n, k, g + static_cast<std::size_t>(i) * n, bt.data(), c + static_cast<std::size_t>(i) * k,
                scratch.data(), accumulate);
}

}  // namespace serial

template <class T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  if (!worth_parallel(static_cast<long>(m) * n * k)) return serial::gemm_nn(m, n, k, a, b, c, accumulate);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) serial::gemm_nn(1, n, k, a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, accumulate);
}

template <class T>
void gemm_tn(int m, int n, int k, const T* a, const T* g, T* c, bool accumulate) {
  if (!worth_parallel(static_cast<long>(m) * n * k)) return serial::gemm_tn(m, n, k, a, g, c, accumulate);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < k; ++p) {
    T* cp = c + static_cast<std::size_t>(p) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) cp[j] = T{0};
    for (int i = 0; i < m; ++i) {
      const T av = a[static_cast<std::size_t>(i) * k + p];
      const T* gi = g + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

template <class T>
void gemm_nt(int m, int n, int k, const T* g, const T* b, T* c, bool accumulate) {
  if (!worth_parallel(static_cast<long>(m) * n * k)) return serial::gemm_nt(m, n, k, g, b, c, accumulate);
  const auto bt = serial::transpose(k, n, b);
#pragma omp parallel
  {
    std::vector<T> scratch(k);
#pragma omp for schedule(static)
    for (int i = 0; i < m; ++i)
      serial::gemm_nt_row(n, k, g + static_cast<std::size_t>(i) * n, bt.data(), c + static_cast<std::size_t>(i) * k,
                          scratch.data(), accumulate);
  }
}

}  // namespace dtii::kernels
