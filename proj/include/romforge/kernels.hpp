#pragma once

// Data-parallel inner loops shared by the polynomial force evaluators and the
// frequency-domain solvers. Every kernel has a portable scalar reference and an
// AVX2/FMA variant; the variant is picked once at startup from CPUID and can be
// forced to the reference path with ROMFORGE_SIMD=scalar.

#include <cstddef>
#include <string_view>

namespace romforge::kernels {

enum class Isa { Scalar, Avx2 };

struct Table {
  Isa isa;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out = a * b (elementwise)
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  /// y += alpha * a * b (elementwise)
  void (*mul_axpy)(double alpha, const double* a, const double* b, double* y, std::size_t n);
  /// y = A x with A row-major rows x cols
  void (*gemv)(std::size_t rows, std::size_t cols, const double* A, const double* x, double* y);
};

const Table& scalar_table();

/// nullptr when the binary was built without AVX2 support.
const Table* avx2_table();

bool cpu_has_avx2();

/// Dispatch table in use by the library.
const Table& active();

/// Overrides the runtime choice; selecting Avx2 on a CPU without it is a no-op.
void select(Isa isa);

std::string_view name(Isa isa);

}  // namespace romforge::kernels
