#include <algorithm>
#include <cmath>

#include "hbfill/simd/flux_kernel.hpp"

namespace hbfill::simd {

FluxConstants FluxConstants::from(const RheoParams& p) {
  const double n = p.n;
  FluxConstants c{};
  c.B = p.B;
  c.S = p.S;
  c.n = n;
  c.inv_n = 1.0 / n;
  c.two_n_p1 = 2.0 * n + 1.0;
  c.shape = n / ((n + 1.0) * (2.0 * n + 1.0));
  c.diff_scale = 1.0 / ((n + 1.0) * (2.0 * n + 1.0));
  c.two_n = 2.0 * n;
  c.n_p1 = n + 1.0;
  c.two_n_sq = 2.0 * n * n;
  return c;
}

// With a = |S - hx| and Y the yield surface, both the flux and the
// coefficients share the factor (aY)^(1/n):
//   q = sgn(S - hx) (aY)^(1/n) * n/((n+1)(2n+1)) * Y ((2n+1)h - nY)
//   V = (aY)^(1/n) h
//   D = (aY)^(1/n) / a * (2n h B/a + (n+1) h^2 + 2n^2 (B/a)^2) / ((n+1)(2n+1))
double node_flux(double h, double hx, const FluxConstants& c) {
  const double d = c.S - hx;
  const double a = std::abs(d);
  if (a == 0.0) return 0.0;
  const double Y = h - c.B / a;
  if (!(Y > 0.0)) return 0.0;
  const double w = c.inv_n == 1.0 ? a * Y : std::pow(a * Y, c.inv_n);
  const double qa = w * c.shape * Y * (c.two_n_p1 * h - c.n * Y);
  return d > 0.0 ? qa : -qa;
}

NodeBounds flux_terms_scalar(const double* h, const double* hx, std::size_t count,
                             const FluxConstants& c, double* q) {
  NodeBounds out;
  for (std::size_t i = 0; i < count; ++i) {
    const double hi = h[i];
    const double d = c.S - hx[i];
    const double a = std::abs(d);
    if (a == 0.0) {
      q[i] = 0.0;
      continue;
    }
    const double b = c.B / a;
    const double Y = hi - b;
    if (!(Y > 0.0)) {
      q[i] = 0.0;
      continue;
    }
    const double w = c.inv_n == 1.0 ? a * Y : std::pow(a * Y, c.inv_n);
    const double qa = w * c.shape * Y * (c.two_n_p1 * hi - c.n * Y);
    q[i] = d > 0.0 ? qa : -qa;
    const double v = w * hi;
    const double dd = w / a * (c.two_n * hi * b + c.n_p1 * hi * hi + c.two_n_sq * b * b) * c.diff_scale;
    out.max_v = std::max(out.max_v, v);
    out.max_d = std::max(out.max_d, dd);
  }
  return out;
}

}  // namespace hbfill::simd
