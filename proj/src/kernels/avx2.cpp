#include <immintrin.h>

#include "kernels_internal.hpp"

namespace crysdiff::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* w, const double* x, const double* b, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = (b ? b[r] : 0.0) + dot(w + r * cols, x, cols);
}

void gemv_t_acc(const double* w, const double* g, double* x_grad, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] != 0.0) axpy(g[r], w + r * cols, x_grad, cols);
  }
}

void ger_acc(const double* g, const double* x, double* w_grad, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] != 0.0) axpy(g[r], x, w_grad + r * cols, cols);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", dot, axpy, gemv, gemv_t_acc, ger_acc};
  return table;
}

}  // namespace crysdiff::kernels
