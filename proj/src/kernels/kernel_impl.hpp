#pragma once

#include "cef/kernels.hpp"

namespace cef::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(CEF_HAVE_AVX2_KERNELS)
extern const KernelTable kAvx2Table;
#endif

}  // namespace cef::kernels::detail
