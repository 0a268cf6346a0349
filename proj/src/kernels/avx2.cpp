// Compiled with -mavx2 -mfma. Nothing here may include Eigen or any other
// header whose inline functions are also instantiated by baseline-ISA
// translation units.
#include <immintrin.h>

#include "kernel_impl.hpp"

namespace cef::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four columns per pass so each y block is loaded and stored once per pass.
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    const double* c0 = a + j * rows;
    const double* c1 = c0 + rows;
    const double* c2 = c1 + rows;
    const double* c3 = c2 + rows;
    const __m256d x0 = _mm256_set1_pd(x[j]);
    const __m256d x1 = _mm256_set1_pd(x[j + 1]);
    const __m256d x2 = _mm256_set1_pd(x[j + 2]);
    const __m256d x3 = _mm256_set1_pd(x[j + 3]);
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      __m256d acc = _mm256_loadu_pd(y + i);
      acc = _mm256_fmadd_pd(x0, _mm256_loadu_pd(c0 + i), acc);
      acc = _mm256_fmadd_pd(x1, _mm256_loadu_pd(c1 + i), acc);
      acc = _mm256_fmadd_pd(x2, _mm256_loadu_pd(c2 + i), acc);
      acc = _mm256_fmadd_pd(x3, _mm256_loadu_pd(c3 + i), acc);
      _mm256_storeu_pd(y + i, acc);
    }
    for (; i < rows; ++i) {
      y[i] += x[j] * c0[i] + x[j + 1] * c1[i] + x[j + 2] * c2[i] + x[j + 3] * c3[i];
    }
  }
  for (; j < cols; ++j) axpy(x[j], a + j * rows, y, rows);
}

void gemv_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = dot(a + j * rows, x, rows);
}

void gram(const double* m, std::size_t n, std::size_t cols, double* g) {
  std::size_t c = 0;
  for (; c + 4 <= cols; c += 4) {
    const double* v0 = m + c * n;
    const double* v1 = v0 + n;
    const double* v2 = v1 + n;
    const double* v3 = v2 + n;
    for (std::size_t j = 0; j < n; ++j) {
      const __m256d s0 = _mm256_set1_pd(v0[j]);
      const __m256d s1 = _mm256_set1_pd(v1[j]);
      const __m256d s2 = _mm256_set1_pd(v2[j]);
      const __m256d s3 = _mm256_set1_pd(v3[j]);
      double* gj = g + j * n;
      std::size_t i = 0;
      for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_loadu_pd(gj + i);
        acc = _mm256_fmadd_pd(s0, _mm256_loadu_pd(v0 + i), acc);
        acc = _mm256_fmadd_pd(s1, _mm256_loadu_pd(v1 + i), acc);
        acc = _mm256_fmadd_pd(s2, _mm256_loadu_pd(v2 + i), acc);
        acc = _mm256_fmadd_pd(s3, _mm256_loadu_pd(v3 + i), acc);
        _mm256_storeu_pd(gj + i, acc);
      }
      for (; i < n; ++i) gj[i] += v0[j] * v0[i] + v1[j] * v1[i] + v2[j] * v2[i] + v3[j] * v3[i];
    }
  }
  for (; c < cols; ++c) {
    const double* v = m + c * n;
    for (std::size_t j = 0; j < n; ++j) axpy(v[j], v, g + j * n, n);
  }
}

void hadamard(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] *= x[i];
}

}  // namespace

const KernelTable kAvx2Table{"avx2", dot, axpy, gemv, gemv_t, gram, hadamard};

}  // namespace cef::kernels::detail
