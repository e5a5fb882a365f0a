#include "simd/variants.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace vppe::simd {
namespace {

bool host_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& detect() {
  if (const char* env = std::getenv("VPPE_SIMD"); env && std::string_view(env) == "scalar") {
    return scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

std::atomic<bool> g_force_scalar{false};

}  // namespace

const KernelTable* avx2_table() {
  static const bool ok = host_has_avx2();
  return ok ? avx2_table_unchecked() : nullptr;
}

const KernelTable& active() {
  static const KernelTable& detected = detect();
  return g_force_scalar.load(std::memory_order_relaxed) ? scalar_table() : detected;
}

void force_scalar(bool on) { g_force_scalar.store(on, std::memory_order_relaxed); }

}  // namespace vppe::simd
