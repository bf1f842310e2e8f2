// Purpose: runtime-dispatched numeric kernels behind the loss and scoring
// layers. Every kernel has a scalar reference implementation and an AVX2
// variant; the dispatch layer picks the best one the CPU supports and can be
// forced onto a specific backend for equivalence testing or debugging.
#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace roadmap::kernels {

// Coefficients of the piecewise negative-rank surrogate, precomputed from a
// surrogate configuration so the hot loops touch plain doubles only.
// The surrogate at score difference t is:
//   sigmoid(t / tau)                    for t < 0
//   sigmoid(t / tau) + 0.5              for 0 <= t <= delta
//   rho * (t - delta) + plateau         for t > delta
// where plateau = sigmoid(delta / tau) + 0.5 makes the function continuous.
struct HminusParams {
  double inv_tau = 100.0;
  double delta = 0.0;
  double rho = 0.0;
  double plateau = 0.0;
};

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend b);

// True when the backend both was compiled in and is supported by this CPU.
bool backend_available(Backend b);

// Backend used by the free functions below: the forced one if set, otherwise
// the best available.
Backend active_backend();

// Force a specific backend (tests, CLI flag). nullopt restores auto-detection.
// Throws std::invalid_argument if the backend is unavailable on this machine.
void force_backend(std::optional<Backend> b);

// Dot product of two length-n arrays.
double dot(const double* a, const double* b, std::size_t n);

// Number of elements with x[i] >= threshold (ties count).
std::size_t count_ge(const double* x, std::size_t n, double threshold);

// Sum of sigmoid((x[i] - center) * inv_tau). When dsig is non-null, writes
// the per-element derivative with respect to x[i] into dsig[0..n).
double sigmoid_rank_sum(const double* x, std::size_t n, double center,
                        double inv_tau, double* dsig);

// Sum of the piecewise surrogate evaluated at x[i] - center. When dh is
// non-null, writes the per-element derivative with respect to x[i].
double hminus_rank_sum(const double* x, std::size_t n, double center,
                       const HminusParams& p, double* dh);

}  // namespace roadmap::kernels
