// Purpose: backend selection and the public kernel entry points.
#include "roadmap/kernels.hpp"

#include <optional>
#include <stdexcept>
#include <string>

#include "kernel_table.hpp"

namespace roadmap::kernels {
namespace {

std::optional<Backend> g_forced;

Backend detect() {
  if (avx2_table() != nullptr && cpu_has_avx2()) return Backend::kAvx2;
  return Backend::kScalar;
}

const KernelTable& table_for(Backend b) {
  if (b == Backend::kAvx2) {
    const KernelTable* t = avx2_table();
    if (t != nullptr) return *t;
  }
  return scalar_table();
}

const KernelTable& active_table() { return table_for(active_backend()); }

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  if (b == Backend::kScalar) return true;
  return avx2_table() != nullptr && cpu_has_avx2();
}

Backend active_backend() { return g_forced.value_or(detect()); }

void force_backend(std::optional<Backend> b) {
  if (b.has_value() && !backend_available(*b)) {
    throw std::invalid_argument("kernel backend '" +
                                std::string(backend_name(*b)) +
                                "' is not available on this machine");
  }
  g_forced = b;
}

double dot(const double* a, const double* b, std::size_t n) {
  return active_table().dot(a, b, n);
}

std::size_t count_ge(const double* x, std::size_t n, double threshold) {
  return active_table().count_ge(x, n, threshold);
}

double sigmoid_rank_sum(const double* x, std::size_t n, double center,
                        double inv_tau, double* dsig) {
  return active_table().sigmoid_rank_sum(x, n, center, inv_tau, dsig);
}

double hminus_rank_sum(const double* x, std::size_t n, double center,
                       const HminusParams& p, double* dh) {
  return active_table().hminus_rank_sum(x, n, center, p, dh);
}

}  // namespace roadmap::kernels
