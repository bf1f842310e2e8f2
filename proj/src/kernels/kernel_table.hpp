// Purpose: internal backend vtable shared by the dispatch layer and the
// per-backend translation units.
#pragma once

#include <cstddef>

#include "roadmap/kernels.hpp"

namespace roadmap::kernels {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  std::size_t (*count_ge)(const double*, std::size_t, double);
  double (*sigmoid_rank_sum)(const double*, std::size_t, double, double,
                             double*);
  double (*hminus_rank_sum)(const double*, std::size_t, double,
                            const HminusParams&, double*);
};

const KernelTable& scalar_table();

// Null when the AVX2 backend is compiled out (non-x86 builds).
const KernelTable* avx2_table();

// Runtime CPU support for the AVX2 backend (AVX2 + FMA).
bool cpu_has_avx2();

}  // namespace roadmap::kernels
