#include "romforge/kernels.hpp"

namespace romforge::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_axpy_scalar(double alpha, const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * a[i] * b[i];
}

void gemv_scalar(std::size_t rows, std::size_t cols, const double* A, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(A + r * cols, x, cols);
}

constexpr Table kScalar{Isa::Scalar, dot_scalar, axpy_scalar, mul_scalar, mul_axpy_scalar, gemv_scalar};

}  // namespace

const Table& scalar_table() { return kScalar; }

}  // namespace romforge::kernels
