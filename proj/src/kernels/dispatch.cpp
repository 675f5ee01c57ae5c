#include <atomic>
#include <cstdlib>
#include <string_view>

#include "mrst/kernels.hpp"

namespace mrst::simd {

#if defined(MRST_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(MRST_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("MRST_SIMD"); env && std::string_view(env) == "scalar") {
    return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &scalar_kernels() : avx2_kernels();
  if (!t) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace mrst::simd
