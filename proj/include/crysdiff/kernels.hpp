#pragma once

#include <cstddef>

namespace crysdiff::kernels {

/// Dense inner loops of the network. Matrices are row-major `rows x cols`.
/// Every variant computes the same quantities; they differ only in
/// floating-point summation order (vector lanes, fused multiply-add).
struct KernelTable {
  const char* name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y = W x + b (b may be null)
  void (*gemv)(const double* w, const double* x, const double* b, double* y, std::size_t rows, std::size_t cols);
  /// x_grad += W^T g
  void (*gemv_t_acc)(const double* w, const double* g, double* x_grad, std::size_t rows, std::size_t cols);
  /// w_grad += g x^T
  void (*ger_acc)(const double* g, const double* x, double* w_grad, std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_kernels();

/// Null when the binary was built without AVX2 support or the CPU lacks
/// AVX2+FMA.
const KernelTable* avx2_kernels();

/// Table used by the library. Chosen once: AVX2 when available unless the
/// environment variable CRYSDIFF_KERNELS=scalar forces the reference path.
const KernelTable& active();

}  // namespace crysdiff::kernels
