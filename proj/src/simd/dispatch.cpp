#include <atomic>
#include <cstdlib>
#include <string_view>

#include "cfs/simd/kernels.hpp"

namespace cfs::simd {

#ifdef CFS_HAVE_AVX2_KERNELS
const KernelTable& avx2_kernel_table() noexcept;
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(CFS_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick(std::string_view which) noexcept {
  if (which == "scalar") return &scalar_kernels();
  if (which == "avx2") return avx2_kernels();
  if (which.empty() || which == "auto") {
    if (const KernelTable* t = avx2_kernels()) return t;
    return &scalar_kernels();
  }
  return nullptr;
}

const KernelTable* initial() noexcept {
  const char* env = std::getenv("CFS_SIMD");
  if (const KernelTable* t = pick(env ? std::string_view(env) : std::string_view())) return t;
  return pick("auto");
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
#ifdef CFS_HAVE_AVX2_KERNELS
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

bool select(std::string_view which) noexcept {
  const KernelTable* t = pick(which);
  if (!t) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace cfs::simd
