#pragma once

#include "vppe/simd/dispatch.hpp"

namespace vppe::simd {

// Defined in avx2.cpp; returns nullptr when not compiled for x86-64.
const KernelTable* avx2_table_unchecked();

}  // namespace vppe::simd
