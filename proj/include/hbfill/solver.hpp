#pragma once

/// Explicit finite-difference solver for the confined lubrication equation
///   h_t + q(h, h_x)_x = 0 on (0, 1),  q(0) = 1,  q(1) = 0,  h(x, 0) = 0,
/// integrated from the empty cavity until the front reaches the far wall.
///
/// Space: centered slopes inside q, upwind differences for q_x. Time:
/// forward Euler with a step limited by both the advective (CFL) and the
/// diffusive constraint of the advection-diffusion form. Node 0 is closed
/// by solving q(h0, (h1 - h0)/dx) = 1 for h0.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hbfill/rheology.hpp"
#include "hbfill/simd/flux_kernel.hpp"

namespace hbfill {

struct Grid {
  std::size_t nx = 0;
  double dx = 0.0;

  /// Uniform grid of nx >= 3 nodes on [0, 1].
  static Grid uniform(std::size_t nx);
  double x(std::size_t i) const { return static_cast<double>(i) * dx; }
};

enum class Provenance { pde, surrogate, observed, noisy };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct HeightProfile {
  std::vector<double> h;
  double t = 0.0;
  RheoParams params;
  Provenance provenance = Provenance::pde;
};

struct SolverConfig {
  std::size_t nx = 301;
  double Cd = 0.5;
  std::optional<double> dt_max;  ///< defaults to dx
  double wall_touch_threshold = 1e-8;
  std::uint64_t max_steps = 2'000'000'000ULL;

  /// Throws DomainError on an invalid configuration.
  void validate() const;
  double resolved_dt_max() const;
};

struct DtSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct SolverRun {
  HeightProfile final;
  double wall_touch_time = 0.0;
  std::uint64_t steps_taken = 0;
  DtSummary dt;
  /// Height at the last node one step before wall-touch.
  double previous_last_height = 0.0;
  /// Volume removed by clamping negative undershoots to zero.
  double clamped_mass = 0.0;
  /// Largest |q(h0, h1) - 1| seen across accepted steps.
  double max_boundary_residual = 0.0;
};

/// Seen by an observer after every accepted step.
struct StepRecord {
  std::span<const double> h;
  double t = 0.0;
  double dt = 0.0;
  std::uint64_t step = 0;
};
using StepObserver = std::function<void(const StepRecord&)>;

/// Node fluxes for state h: q_i from centered slopes inside, q_0 = 1 and
/// q_{nx-1} = 0 imposed.
std::vector<double> spatial_fluxes(std::span<const double> h, const Grid& grid, const RheoParams& p);

/// min(dx / (2 max_v), Cd dx^2 / max_d, dt_max), skipping vanishing terms.
double dt_from_bounds(const simd::NodeBounds& b, double dx, double Cd, double dt_max);

/// Stable forward-Euler step for state h:
///   min(dx / (2 max|V|), Cd dx^2 / max|D|, dt_max)
/// with one-sided slopes at the two end nodes. Vanishing terms are dropped.
double stable_dt(std::span<const double> h, const Grid& grid, const RheoParams& p, const SolverConfig& config);

/// Left-hand side of the node-0 closure: q evaluated at h0 with the
/// downwind slope (h1 - h0)/dx. The closure asks for this to equal 1.
double boundary_flux(double h0, double h1, double dx, const RheoParams& p);

/// Point above which the yield surface at node 0 is positive.
double h0_lower_bound(double h1, double dx, const RheoParams& p);

struct BoundarySolveOptions {
  double residual_tol = 1e-10;
  int max_expansions = 200;
  int max_iterations = 200;
};

/// Unique h0 >= 0 with boundary_flux(h0, h1, dx, p) == 1. Throws
/// NumericalError if the root cannot be bracketed. A hint (e.g. the root
/// of the previous time step) only narrows the initial bracket.
double solve_h0(double h1, double dx, const RheoParams& p, const BoundarySolveOptions& opts = {},
                std::optional<double> hint = std::nullopt);

/// Stateful integrator; owns the workspace so repeated steps do not allocate.
class Integrator {
 public:
  Integrator(const RheoParams& p, const SolverConfig& config);

  const Grid& grid() const { return grid_; }
  std::span<const double> state() const { return h_; }
  double time() const { return t_; }
  std::uint64_t steps() const { return steps_; }
  double clamped_mass() const { return clamped_mass_; }
  double last_boundary_residual() const { return last_residual_; }

  /// Replaces the state (length must equal nx; entries must be >= 0).
  void reset(std::span<const double> h, double t = 0.0);

  /// One forward-Euler step; returns the dt used.
  double advance();

 private:
  RheoParams params_;
  SolverConfig config_;
  Grid grid_;
  simd::FluxConstants consts_;
  double dt_max_;
  std::vector<double> h_;
  std::vector<double> hx_;
  std::vector<double> q_;
  double t_ = 0.0;
  std::uint64_t steps_ = 0;
  double clamped_mass_ = 0.0;
  double last_residual_ = 0.0;
};

struct StepOutput {
  std::vector<double> h;
  double dt = 0.0;
};

/// One step from an arbitrary state (convenience wrapper over Integrator).
StepOutput step(std::span<const double> h, const Grid& grid, const RheoParams& p, const SolverConfig& config);

/// Integrates from h = 0 until h[nx-1] >= wall_touch_threshold. Throws
/// NumericalError when max_steps is exhausted or the state blows up.
SolverRun run_to_wall_touch(const RheoParams& p, const SolverConfig& config,
                            const StepObserver& observer = nullptr);

/// Trapezoid-rule volume of a profile on [0, 1].
double trapezoid_mass(std::span<const double> h, double dx);

struct ConvergenceRow {
  std::size_t nx = 0;
  double dx = 0.0;
  double l2_error = 0.0;
  double wall_touch_time = 0.0;
  std::uint64_t steps = 0;
};

struct ConvergenceTable {
  std::size_t nx_ref = 0;
  double ref_wall_touch_time = 0.0;
  std::vector<ConvergenceRow> rows;
  /// Least-squares slope of log(error) against log(dx) over rows with a
  /// nonzero error; NaN when fewer than two such rows exist.
  double order = 0.0;
};

/// L2 error of wall-touch profiles on coarse grids against a reference.
/// Each nx - 1 must divide nx_ref - 1 so that nodes coincide. The error is
/// the grid-weighted norm sqrt(dx * sum (h - h_ref)^2).
ConvergenceTable convergence_study(const RheoParams& p, std::span<const std::size_t> nx_list, std::size_t nx_ref,
                                   const SolverConfig& base = {});

/// Same, with a precomputed reference profile.
ConvergenceTable convergence_study(const RheoParams& p, std::span<const std::size_t> nx_list,
                                   const SolverRun& reference, const SolverConfig& base = {});

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace hbfill
