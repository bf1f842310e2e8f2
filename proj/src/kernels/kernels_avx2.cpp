// Purpose: AVX2 backend, 4 double lanes with FMA. Compiled into every x86-64
// build; entered only after the runtime CPU check in the dispatch layer.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

#include "kernel_math.hpp"
#include "kernel_table.hpp"
#include "roadmap/kernels.hpp"

namespace roadmap::kernels {
namespace {

__attribute__((target("avx2,fma"))) inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// exp on (-inf, 0]. Inputs below -708 clamp to -708 (~3e-308); fine for the
// sigmoid tails this feeds. Cephes-style: reduce x = n*ln2 + r, evaluate a
// rational approximation of exp(r), scale by 2^n through the exponent bits.
__attribute__((target("avx2,fma"))) inline __m256d exp_nonpos(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  __m256d n = _mm256_floor_pd(
      _mm256_fmadd_pd(x, log2e, _mm256_set1_pd(0.5)));
  // r = x - n*ln2, with ln2 split for extra precision
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);
  __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000005e0));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
  // 2^n via the exponent field; n is in [-1022, 1] here, so always normal.
  __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
}

// Stable logistic of u and its derivative, via exp(-|u|).
__attribute__((target("avx2,fma"))) inline void sigmoid_lanes(__m256d u,
                                                              __m256d& s,
                                                              __m256d& ds) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d absu = _mm256_andnot_pd(_mm256_set1_pd(-0.0), u);
  __m256d e = exp_nonpos(_mm256_sub_pd(_mm256_setzero_pd(), absu));
  __m256d hi = _mm256_div_pd(one, _mm256_add_pd(one, e));
  __m256d lo = _mm256_mul_pd(e, hi);
  __m256d ge = _mm256_cmp_pd(u, _mm256_setzero_pd(), _CMP_GE_OQ);
  s = _mm256_blendv_pd(lo, hi, ge);
  ds = _mm256_mul_pd(hi, lo);
}

__attribute__((target("avx2,fma"))) double dot_avx2(const double* a,
                                                    const double* b,
                                                    std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

__attribute__((target("avx2,fma"))) std::size_t count_ge_avx2(
    const double* x, std::size_t n, double threshold) {
  const __m256d t = _mm256_set1_pd(threshold);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d ge = _mm256_cmp_pd(_mm256_loadu_pd(x + i), t, _CMP_GE_OQ);
    c += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(ge)));
  }
  for (; i < n; ++i) c += (x[i] >= threshold) ? 1 : 0;
  return c;
}

__attribute__((target("avx2,fma"))) double sigmoid_rank_sum_avx2(
    const double* x, std::size_t n, double center, double inv_tau,
    double* dsig) {
  const __m256d c = _mm256_set1_pd(center);
  const __m256d it = _mm256_set1_pd(inv_tau);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d u = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), c), it);
    __m256d s, ds;
    sigmoid_lanes(u, s, ds);
    acc = _mm256_add_pd(acc, s);
    if (dsig != nullptr) _mm256_storeu_pd(dsig + i, _mm256_mul_pd(ds, it));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    double s, ds;
    detail::sigmoid_pair((x[i] - center) * inv_tau, s, ds);
    total += s;
    if (dsig != nullptr) dsig[i] = ds * inv_tau;
  }
  return total;
}

__attribute__((target("avx2,fma"))) double hminus_rank_sum_avx2(
    const double* x, std::size_t n, double center, const HminusParams& p,
    double* dh) {
  const __m256d c = _mm256_set1_pd(center);
  const __m256d it = _mm256_set1_pd(p.inv_tau);
  const __m256d delta = _mm256_set1_pd(p.delta);
  const __m256d rho = _mm256_set1_pd(p.rho);
  const __m256d plateau = _mm256_set1_pd(p.plateau);
  const __m256d half = _mm256_set1_pd(0.5);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
    __m256d s, ds;
    sigmoid_lanes(_mm256_mul_pd(t, it), s, ds);
    __m256d gez = _mm256_cmp_pd(t, _mm256_setzero_pd(), _CMP_GE_OQ);
    __m256d sig_val = _mm256_add_pd(s, _mm256_and_pd(gez, half));
    __m256d sig_d = _mm256_mul_pd(ds, it);
    __m256d lin = _mm256_cmp_pd(t, delta, _CMP_GT_OQ);
    __m256d lin_val =
        _mm256_fmadd_pd(rho, _mm256_sub_pd(t, delta), plateau);
    __m256d val = _mm256_blendv_pd(sig_val, lin_val, lin);
    acc = _mm256_add_pd(acc, val);
    if (dh != nullptr)
      _mm256_storeu_pd(dh + i, _mm256_blendv_pd(sig_d, rho, lin));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    double h, d;
    detail::hminus_pair(x[i] - center, p, h, d);
    total += h;
    if (dh != nullptr) dh[i] = d;
  }
  return total;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{dot_avx2, count_ge_avx2, sigmoid_rank_sum_avx2,
                             hminus_rank_sum_avx2};
  return &t;
}

bool cpu_has_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace roadmap::kernels

#else  // non-x86 build: backend compiled out

#include "kernel_table.hpp"

namespace roadmap::kernels {
const KernelTable* avx2_table() { return nullptr; }
bool cpu_has_avx2() { return false; }
}  // namespace roadmap::kernels

#endif
