#pragma once

#include "crysdiff/kernels.hpp"

namespace crysdiff::kernels {

#if defined(CRYSDIFF_HAVE_AVX2)
/// Defined in avx2.cpp, which is the only translation unit compiled with
/// -mavx2 -mfma. Must only be called after a runtime CPU check.
const KernelTable& avx2_table();
#endif

}  // namespace crysdiff::kernels
