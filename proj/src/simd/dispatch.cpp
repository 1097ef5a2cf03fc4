#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "hbfill/error.hpp"
#include "hbfill/simd/flux_kernel.hpp"

namespace hbfill::simd {

#if defined(HBFILL_HAVE_AVX2)
void pow_batch_avx2(const double* x, double y, double* out, std::size_t count);
#endif

namespace {

bool cpu_has_avx2() {
#if defined(HBFILL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

KernelKind initial_kernel() {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("HBFILL_KERNEL")) {
    const std::string s(env);
    if (s == "scalar") return KernelKind::scalar;
    if (s == "avx2" && avx2) return KernelKind::avx2;
  }
  return avx2 ? KernelKind::avx2 : KernelKind::scalar;
}

std::atomic<KernelKind>& current() {
  static std::atomic<KernelKind> kind{initial_kernel()};
  return kind;
}

FluxKernelFn resolve(KernelKind kind) {
#if defined(HBFILL_HAVE_AVX2)
  if (kind == KernelKind::avx2) return &flux_terms_avx2;
#endif
  (void)kind;
  return &flux_terms_scalar;
}

}  // namespace

bool kernel_available(KernelKind kind) {
  return kind == KernelKind::scalar || (kind == KernelKind::avx2 && cpu_has_avx2());
}

KernelKind active_kernel() { return current().load(std::memory_order_relaxed); }

void select_kernel(KernelKind kind) {
  if (!kernel_available(kind)) {
    throw DomainError("flux kernel '" + std::string(kernel_name(kind)) + "' is not available on this CPU/build");
  }
  current().store(kind, std::memory_order_relaxed);
}

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::scalar:
      return "scalar";
    case KernelKind::avx2:
      return "avx2";
  }
  return "unknown";
}

NodeBounds flux_terms(KernelKind kind, std::span<const double> h, std::span<const double> hx,
                      const FluxConstants& c, std::span<double> q) {
  if (hx.size() != h.size() || q.size() != h.size()) {
    throw DomainError("flux_terms: span lengths differ");
  }
  return resolve(kind)(h.data(), hx.data(), h.size(), c, q.data());
}

NodeBounds flux_terms(std::span<const double> h, std::span<const double> hx, const FluxConstants& c,
                      std::span<double> q) {
  return flux_terms(active_kernel(), h, hx, c, q);
}

void pow_batch(std::span<const double> x, double y, std::span<double> out) {
  if (out.size() != x.size()) {
    throw DomainError("pow_batch: span lengths differ");
  }
#if defined(HBFILL_HAVE_AVX2)
  if (cpu_has_avx2()) {
    pow_batch_avx2(x.data(), y, out.data(), x.size());
    return;
  }
#endif
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::pow(x[i], y);
}

}  // namespace hbfill::simd
