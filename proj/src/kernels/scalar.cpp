#include "kernels_internal.hpp"

namespace crysdiff::kernels {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot, axpy, gemv, gemv_t_acc, ger_acc};
  return table;
}

}  // namespace crysdiff::kernels
