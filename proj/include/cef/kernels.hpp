#pragma once
// Dense inner-loop kernels shared by every CEF and attack.
//
// Each kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The variant is picked once per process from CPUID; setting
// CEF_KERNELS=scalar (or avx2) in the environment overrides the choice.
// Matrices are column-major, matching Eigen's default storage.

#include <cstddef>
#include <span>
#include <string_view>

namespace cef::kernels {

struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A is rows x cols column-major
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y = A^T x, A is rows x cols column-major
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // G += M M^T, M is n x cols column-major, G is n x n column-major
  void (*gram)(const double* m, std::size_t n, std::size_t cols, double* g);
  // y[i] *= x[i]
  void (*hadamard)(const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the build has no AVX2 variant or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table every library routine uses.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace cef::kernels
