#include "hbfill/rheology.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "hbfill/error.hpp"

namespace hbfill {

double yield_surface(double h, double hx, const RheoParams& p) {
  const double drive = std::abs(p.S - hx);
  if (drive == 0.0) {
    return 0.0;
  }
  return std::max(h - p.B / drive, 0.0);
}

double flux(double h, double hx, const RheoParams& p) {
  const double Y = yield_surface(h, hx, p);
  if (Y <= 0.0) {
    return 0.0;
  }
  const double n = p.n;
  const double d = p.S - hx;
  const double sign = d > 0.0 ? 1.0 : -1.0;
  const double shape = n * std::pow(Y, 1.0 + 1.0 / n) / ((n + 1.0) * (2.0 * n + 1.0));
  return sign * std::pow(std::abs(d), 1.0 / n) * shape * ((2.0 * n + 1.0) * h - n * Y);
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << name << " must be strictly positive and finite (got " << v << ")";
    throw DomainError(os.str());
  }
}

}  // namespace

std::pair<RheoParams, DerivedScales> nondimensionalize(const PhysicalSetup& s) {
  require_positive(s.kappa, "kappa");
  require_positive(s.rho, "rho");
  require_positive(s.n, "n");
  require_positive(s.L, "L");
  require_positive(s.W, "W");
  require_positive(s.Q0, "Q0");
  require_positive(s.g, "g");
  // tau_y = 0 is the power-law limit and maps to B = 0.
  if (!(s.tau_y >= 0.0) || !std::isfinite(s.tau_y)) {
    throw DomainError("tau_y must be nonnegative and finite");
  }
  if (!(s.phi >= 0.0) || !(s.phi < std::numbers::pi / 2)) {
    throw DomainError("phi must lie in [0, pi/2)");
  }

  DerivedScales sc;
  const double base = s.kappa * s.L / (s.rho * s.g * std::cos(s.phi)) * std::pow(s.Q0 / s.W, s.n);
  sc.H0 = std::pow(base, 1.0 / (2.0 * (1.0 + s.n)));
  sc.U = s.Q0 / (s.W * sc.H0);
  sc.nu = (s.kappa / s.rho) * std::pow(sc.U / sc.H0, s.n - 1.0);
  sc.epsilon = sc.H0 / s.L;

  RheoParams p;
  p.B = sc.H0 * s.tau_y / (s.rho * sc.nu * sc.U);
  p.S = std::tan(s.phi) / sc.epsilon;
  p.n = s.n;
  return {p, sc};
}

StdPoint standardize_unchecked(double B, double S, const ParamDomain& d) {
  return {(B - d.B_offset) / d.B_divisor, (S - d.S_offset) / d.S_divisor};
}

StdPoint standardize(const RheoParams& p, const ParamDomain& d) {
  auto fail = [](const char* what, double v, double bound) {
    std::ostringstream os;
    os << what << " (value " << v << ", bound " << bound << ")";
    throw DomainError(os.str());
  };
  if (!(p.B >= d.B_min)) fail("B below lower bound", p.B, d.B_min);
  if (!(p.B <= d.B_max)) fail("B above upper bound", p.B, d.B_max);
  if (!(p.S >= d.S_min)) fail("S below lower bound", p.S, d.S_min);
  if (!(p.S <= d.S_max)) fail("S above upper bound", p.S, d.S_max);
  return standardize_unchecked(p.B, p.S, d);
}

std::pair<double, double> destandardize(StdPoint x, const ParamDomain& d) {
  return {d.B_offset + x.Bt * d.B_divisor, d.S_offset + x.St * d.S_divisor};
}

}  // namespace hbfill
