#pragma once

/// Nondimensional Herschel-Bulkley lubrication model: the flux law, the
/// yield surface, the (B, S) parameter domain and conversions from
/// dimensional setups.

#include <utility>

namespace hbfill {

/// Nondimensional triple driving the lubrication equation.
struct RheoParams {
  double B = 0.0;  ///< Bingham number
  double S = 0.0;  ///< slope parameter tan(phi)/epsilon
  double n = 1.0;  ///< power-law index

  friend bool operator==(const RheoParams&, const RheoParams&) = default;
};

/// Dimensional description of a cavity-filling experiment (SI units).
struct PhysicalSetup {
  double tau_y = 0.0;  ///< yield stress [Pa]
  double kappa = 0.0;  ///< consistency [Pa s^n]
  double rho = 0.0;    ///< density [kg/m^3]
  double n = 1.0;      ///< power index
  double phi = 0.0;    ///< inclination [rad], in [0, pi/2)
  double L = 0.0;      ///< cavity length [m]
  double W = 0.0;      ///< transverse width [m]
  double Q0 = 0.0;     ///< injected flow rate [m^3/s]
  double g = 9.81;     ///< gravity [m/s^2]
};

struct DerivedScales {
  double H0 = 0.0;       ///< characteristic height [m]
  double U = 0.0;        ///< characteristic velocity [m/s]
  double nu = 0.0;       ///< characteristic kinematic viscosity [m^2/s]
  double epsilon = 0.0;  ///< aspect ratio H0 / L
};

/// Rectangle of (B, S) values a surrogate is trained on, together with the
/// affine map onto [-1, 1]^2 used by the Legendre basis. The map constants
/// are stored explicitly so that a surrogate trained with another
/// convention can be reloaded unchanged.
struct ParamDomain {
  double B_min = 0.5;
  double B_max = 250.0;
  double S_min = 0.05;
  double S_max = 120.0;
  double B_offset = 125.25;
  double B_divisor = 124.75;
  double S_offset = 60.025;
  double S_divisor = 59.975;

  /// Midpoint offsets and half-range divisors: the rectangle maps exactly
  /// onto [-1, 1]^2.
  static constexpr ParamDomain from_bounds(double B_min, double B_max, double S_min, double S_max) {
    return {B_min, B_max, S_min, S_max, 0.5 * (B_min + B_max), 0.5 * (B_max - B_min),
            0.5 * (S_min + S_max), 0.5 * (S_max - S_min)};
  }

  bool contains(double B, double S) const {
    return B >= B_min && B <= B_max && S >= S_min && S <= S_max;
  }
};

/// Domain the production surrogate is trained on.
inline constexpr ParamDomain kDefaultDomain{};

/// Bounds on n accepted by surrogate training.
inline constexpr double kMinPowerIndex = 0.2;
inline constexpr double kMaxPowerIndex = 1.2;

/// Standardized coordinates in [-1, 1]^2.
struct StdPoint {
  double Bt = 0.0;
  double St = 0.0;
};

/// Y = max(h - B/|S - hx|, 0), with Y = 0 when S == hx.
double yield_surface(double h, double hx, const RheoParams& p);

/// Lubrication flux q(h, hx). Exactly 0 whenever the yield surface is 0.
double flux(double h, double hx, const RheoParams& p);

/// Converts a dimensional setup to (B, S, n) plus the scales used.
/// Throws DomainError on nonpositive quantities or phi outside [0, pi/2).
std::pair<RheoParams, DerivedScales> nondimensionalize(const PhysicalSetup& setup);

/// Affine map of (B, S) onto [-1, 1]^2. Throws DomainError naming the
/// violated bound when (B, S) lies outside `domain`.
StdPoint standardize(const RheoParams& p, const ParamDomain& domain = kDefaultDomain);

/// Same map without the bounds check (used for flagged extrapolation).
StdPoint standardize_unchecked(double B, double S, const ParamDomain& domain = kDefaultDomain);

/// Inverse of standardize. Returns (B, S).
std::pair<double, double> destandardize(StdPoint x, const ParamDomain& domain = kDefaultDomain);

}  // namespace hbfill
