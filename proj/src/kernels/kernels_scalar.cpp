// Purpose: scalar reference backend. Defines the semantics the SIMD variants
// are equivalence-tested against.
#include <cstddef>

#include "kernel_math.hpp"
#include "kernel_table.hpp"
#include "roadmap/kernels.hpp"

namespace roadmap::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

std::size_t count_ge_scalar(const double* x, std::size_t n, double threshold) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += (x[i] >= threshold) ? 1 : 0;
  return c;
}

double sigmoid_rank_sum_scalar(const double* x, std::size_t n, double center,
                               double inv_tau, double* dsig) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s, ds;
    detail::sigmoid_pair((x[i] - center) * inv_tau, s, ds);
    acc += s;
    if (dsig != nullptr) dsig[i] = ds * inv_tau;
  }
  return acc;
}

double hminus_rank_sum_scalar(const double* x, std::size_t n, double center,
                              const HminusParams& p, double* dh) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double h, d;
    detail::hminus_pair(x[i] - center, p, h, d);
    acc += h;
    if (dh != nullptr) dh[i] = d;
  }
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{dot_scalar, count_ge_scalar,
                             sigmoid_rank_sum_scalar, hminus_rank_sum_scalar};
  return t;
}

}  // namespace roadmap::kernels
