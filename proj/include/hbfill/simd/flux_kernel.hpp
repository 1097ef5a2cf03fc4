#pragma once

// Node-wise flux and stability-coefficient kernels.
//
// One pass over the grid evaluates, for every node, the lubrication flux q
// and the magnitudes of the advection coefficient V and the diffusion
// coefficient D of the advection-diffusion form of the equation. The
// scalar kernel is the reference; the AVX2 kernel must agree with it to
// within a few ulps and is chosen at runtime when the CPU supports it.
//
// Selection order: select_kernel() if called, else the HBFILL_KERNEL
// environment variable ("scalar", "avx2", "auto"), else the best available.

#include <cstddef>
#include <span>
#include <string_view>

#include "hbfill/rheology.hpp"

namespace hbfill::simd {

enum class KernelKind { scalar, avx2 };

struct NodeBounds {
  double max_v = 0.0;  ///< max_i |V_i|
  double max_d = 0.0;  ///< max_i |D_i|
};

/// Precomputed per-run constants shared by all kernels.
struct FluxConstants {
  double B, S, n;
  double inv_n;       // 1/n
  double two_n_p1;    // 2n+1
  double shape;       // n / ((n+1)(2n+1))
  double diff_scale;  // 1 / ((n+1)(2n+1))
  double two_n;       // 2n
  double n_p1;        // n+1
  double two_n_sq;    // 2n^2

  static FluxConstants from(const RheoParams& p);
};

/// Flux at a single node with the fused single-pow evaluation used by the
/// scalar kernel.
double node_flux(double h, double hx, const FluxConstants& c);

/// Writes q[i] = flux(h[i], hx[i]) for all i and returns max |V|, max |D|.
/// All spans must have the same length.
using FluxKernelFn = NodeBounds (*)(const double* h, const double* hx, std::size_t count,
                                    const FluxConstants& c, double* q);

NodeBounds flux_terms_scalar(const double* h, const double* hx, std::size_t count,
                             const FluxConstants& c, double* q);
#if defined(HBFILL_HAVE_AVX2)
NodeBounds flux_terms_avx2(const double* h, const double* hx, std::size_t count,
                           const FluxConstants& c, double* q);
#endif

bool kernel_available(KernelKind kind);
KernelKind active_kernel();
/// Throws DomainError if `kind` is not available on this build/CPU.
void select_kernel(KernelKind kind);
std::string_view kernel_name(KernelKind kind);

/// Dispatching entry point.
NodeBounds flux_terms(std::span<const double> h, std::span<const double> hx,
                      const FluxConstants& c, std::span<double> q);
NodeBounds flux_terms(KernelKind kind, std::span<const double> h, std::span<const double> hx,
                      const FluxConstants& c, std::span<double> q);

/// Elementwise x^y for x > 0 using the same vector routine as the AVX2
/// kernel (falls back to std::pow without AVX2). Exposed for testing.
void pow_batch(std::span<const double> x, double y, std::span<double> out);

}  // namespace hbfill::simd
