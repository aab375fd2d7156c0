#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace crysdiff::kernels {

const KernelTable* avx2_kernels() {
#if defined(CRYSDIFF_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* forced = std::getenv("CRYSDIFF_KERNELS");
    if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_kernels();
    if (const KernelTable* fast = avx2_kernels()) return *fast;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace crysdiff::kernels
