#include "romforge/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace romforge::kernels {

#ifndef ROMFORGE_HAVE_AVX2
const Table* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Table* initial_choice() {
  if (const char* env = std::getenv("ROMFORGE_SIMD")) {
    if (std::string(env) == "scalar") return &scalar_table();
  }
  if (cpu_has_avx2() && avx2_table() != nullptr) return avx2_table();
  return &scalar_table();
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{initial_choice()};
  return table;
}

}  // namespace

const Table& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
  if (isa == Isa::Scalar) {
    current().store(&scalar_table(), std::memory_order_release);
  } else if (cpu_has_avx2() && avx2_table() != nullptr) {
    current().store(avx2_table(), std::memory_order_release);
  }
}

std::string_view name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace romforge::kernels
