#include "kernel_impl.hpp"

namespace cef::kernels::detail {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    const double* col = a + j * rows;
    for (std::size_t i = 0; i < rows; ++i) y[i] += xj * col[i];
  }
}

void gemv_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = dot(a + j * rows, x, rows);
}

void gram(const double* m, std::size_t n, std::size_t cols, double* g) {
  for (std::size_t c = 0; c < cols; ++c) {
    const double* v = m + c * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double vj = v[j];
      double* gj = g + j * n;
      for (std::size_t i = 0; i < n; ++i) gj[i] += vj * v[i];
    }
  }
}

void hadamard(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

}  // namespace

const KernelTable kScalarTable{"scalar", dot, axpy, gemv, gemv_t, gram, hadamard};

}  // namespace cef::kernels::detail
