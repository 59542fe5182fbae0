#include <doctest.h>

#include "romforge/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace romforge;

TEST_CASE("AVX2 kernels match the scalar reference") {
  const kernels::Table* simd = kernels::avx2_table();
  if (simd == nullptr || !kernels::cpu_has_avx2()) {
    MESSAGE("AVX2 path not available; equivalence test skipped");
    return;
  }
  const auto& ref = kernels::scalar_table();
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // lengths exercise the vector body, the unrolled body and every tail length
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u, 1023u}) {
    std::vector<double> a(n), b(n), y1(n), y2(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      y1[i] = y2[i] = u(rng);
    }
    const double d1 = ref.dot(a.data(), b.data(), n), d2 = simd->dot(a.data(), b.data(), n);
    CHECK(std::abs(d1 - d2) <= 1e-14 * static_cast<double>(n + 1));

    ref.axpy(0.7, a.data(), y1.data(), n);
    simd->axpy(0.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15);

    ref.mul(a.data(), b.data(), y1.data(), n);
    simd->mul(a.data(), b.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);

    ref.mul_axpy(-1.3, a.data(), b.data(), y1.data(), n);
    simd->mul_axpy(-1.3, a.data(), b.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15);

    const std::size_t rows = 5;
    std::vector<double> A(rows * n), g1(rows), g2(rows);
    for (auto& v : A) v = u(rng);
    ref.gemv(rows, n, A.data(), a.data(), g1.data());
    simd->gemv(rows, n, A.data(), a.data(), g2.data());
    for (std::size_t r = 0; r < rows; ++r) CHECK(std::abs(g1[r] - g2[r]) <= 1e-14 * static_cast<double>(n + 1));
  }
}

TEST_CASE("dispatch selection") {
  kernels::select(kernels::Isa::Scalar);
  CHECK(kernels::active().isa == kernels::Isa::Scalar);
  kernels::select(kernels::Isa::Avx2);
  CHECK(kernels::active().isa == (kernels::cpu_has_avx2() && kernels::avx2_table() ? kernels::Isa::Avx2
                                                                                      : kernels::Isa::Scalar));
  CHECK(kernels::name(kernels::Isa::Scalar) == "scalar");
}
