#include "hbfill/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hbfill/error.hpp"

namespace hbfill {

Grid Grid::uniform(std::size_t nx) {
  if (nx < 3) {
    throw DomainError("grid needs at least 3 nodes (got " + std::to_string(nx) + ")");
  }
  return Grid{nx, 1.0 / static_cast<double>(nx - 1)};
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::pde:
      return "pde";
    case Provenance::surrogate:
      return "surrogate";
    case Provenance::observed:
      return "observed";
    case Provenance::noisy:
      return "noisy";
  }
  return "pde";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "pde") return Provenance::pde;
  if (s == "surrogate") return Provenance::surrogate;
  if (s == "observed") return Provenance::observed;
  if (s == "noisy") return Provenance::noisy;
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

void SolverConfig::validate() const {
  if (nx < 3) throw DomainError("nx must be >= 3");
  if (!(Cd > 0.0 && Cd <= 0.5)) throw DomainError("Cd must lie in (0, 0.5]");
  if (!(wall_touch_threshold > 0.0)) throw DomainError("wall_touch_threshold must be > 0");
  if (dt_max && !(*dt_max > 0.0)) throw DomainError("dt_max must be > 0");
  if (max_steps == 0) throw DomainError("max_steps must be > 0");
}

double SolverConfig::resolved_dt_max() const {
  return dt_max.value_or(1.0 / static_cast<double>(nx - 1));
}

namespace {

void centered_slopes(std::span<const double> h, double dx, std::span<double> hx) {
  const std::size_t n = h.size();
  const double inv2dx = 0.5 / dx;
  hx[0] = (h[1] - h[0]) / dx;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    hx[i] = (h[i + 1] - h[i - 1]) * inv2dx;
  }
  hx[n - 1] = (h[n - 1] - h[n - 2]) / dx;
}


void check_state(std::span<const double> h, const Grid& grid) {
  if (h.size() != grid.nx) {
    throw DomainError("profile length " + std::to_string(h.size()) + " does not match nx = " +
                      std::to_string(grid.nx));
  }
}

}  // namespace

std::vector<double> spatial_fluxes(std::span<const double> h, const Grid& grid, const RheoParams& p) {
  check_state(h, grid);
  std::vector<double> hx(h.size()), q(h.size());
  centered_slopes(h, grid.dx, hx);
  simd::flux_terms(h, hx, simd::FluxConstants::from(p), q);
  q.front() = 1.0;
  q.back() = 0.0;
  return q;
}

double dt_from_bounds(const simd::NodeBounds& b, double dx, double Cd, double dt_max) {
  double dt = dt_max;
  if (b.max_v > 0.0) dt = std::min(dt, dx / (2.0 * b.max_v));
  if (b.max_d > 0.0) dt = std::min(dt, Cd * dx * dx / b.max_d);
  return dt;
}

double stable_dt(std::span<const double> h, const Grid& grid, const RheoParams& p, const SolverConfig& config) {
  check_state(h, grid);
  std::vector<double> hx(h.size()), q(h.size());
  centered_slopes(h, grid.dx, hx);
  const auto bounds = simd::flux_terms(h, hx, simd::FluxConstants::from(p), q);
  return dt_from_bounds(bounds, grid.dx, config.Cd, config.resolved_dt_max());
}

double boundary_flux(double h0, double h1, double dx, const RheoParams& p) {
  return flux(h0, (h1 - h0) / dx, p);
}

double h0_lower_bound(double h1, double dx, const RheoParams& p) {
  const double half = 0.5 * (h1 - p.S * dx);
  return half + std::sqrt(half * half + p.B * dx);
}

namespace {

// Brent's method on a bracket [a, b] with f(a) < 0 < f(b).
template <typename F>
double brent_root(F&& f, double a, double b, double fa, double fb, double ftol, int max_iter) {
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b);
    const double m = 0.5 * (c - b);
    if (std::abs(fb) <= ftol || std::abs(m) <= tol || fb == 0.0) {
      return b;
    }
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double s = fb / fa;
      double pnum, qden;
      if (a == c) {
        pnum = 2.0 * m * s;
        qden = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        pnum = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
        qden = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (pnum > 0.0) {
        qden = -qden;
      } else {
        pnum = -pnum;
      }
      if (2.0 * pnum < std::min(3.0 * m * qden - std::abs(tol * qden), std::abs(e * qden))) {
        e = d;
        d = pnum / qden;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  return b;
}

}  // namespace

double solve_h0(double h1, double dx, const RheoParams& p, const BoundarySolveOptions& opts,
                std::optional<double> hint) {
  if (!(dx > 0.0)) throw DomainError("solve_h0: dx must be > 0");
  const auto consts = simd::FluxConstants::from(p);
  auto residual = [&](double h0) { return simd::node_flux(h0, (h1 - h0) / dx, consts) - 1.0; };
  auto no_bracket = [&](double from) {
    std::ostringstream os;
    os << "solve_h0: no sign change above h0 = " << from << " (h1 = " << h1 << ", dx = " << dx
       << ", B = " << p.B << ", S = " << p.S << ", n = " << p.n << ")";
    return NumericalError(os.str());
  };

  const double bound = std::max(h0_lower_bound(h1, dx, p), 0.0);
  double lo = bound;
  double f_lo = residual(lo);
  if (f_lo >= 0.0) {
    // The residual is exactly -1 at the bound; only rounding gets here.
    return lo;
  }

  double hi = 0.0;
  double f_hi = 0.0;
  if (hint && *hint > bound) {
    // Narrow bracket around the previous root; the state moves little per step.
    const double f_hint = residual(*hint);
    if (f_hint == 0.0) return *hint;
    double width = std::max(*hint * 1e-6, 1e-14);
    if (f_hint < 0.0) {
      lo = *hint;
      f_lo = f_hint;
      for (int k = 0;; ++k) {
        hi = lo + width;
        f_hi = residual(hi);
        if (f_hi > 0.0) break;
        if (k > opts.max_expansions || !std::isfinite(f_hi)) throw no_bracket(lo);
        lo = hi;
        f_lo = f_hi;
        width *= 4.0;
      }
    } else {
      hi = *hint;
      f_hi = f_hint;
      for (;;) {
        lo = std::max(bound, hi - width);
        f_lo = residual(lo);
        if (f_lo < 0.0) break;
        hi = lo;
        f_hi = f_lo;
        width *= 4.0;
      }
    }
  } else {
    double width = std::max(lo, 1e-3);
    hi = lo + width;
    f_hi = residual(hi);
    int expansions = 0;
    while (f_hi <= 0.0) {
      if (++expansions > opts.max_expansions || !std::isfinite(f_hi)) throw no_bracket(lo);
      width *= 2.0;
      hi = lo + width;
      f_hi = residual(hi);
    }
  }
  if (f_hi == 0.0) return hi;
  return brent_root(residual, lo, hi, f_lo, f_hi, 0.25 * opts.residual_tol, opts.max_iterations);
}

Integrator::Integrator(const RheoParams& p, const SolverConfig& config)
    : params_(p),
      config_(config),
      grid_(Grid::uniform(config.nx)),
      consts_(simd::FluxConstants::from(p)),
      dt_max_(config.resolved_dt_max()),
      h_(config.nx, 0.0),
      hx_(config.nx, 0.0),
      q_(config.nx, 0.0) {
  config_.validate();
  if (!(p.B >= 0.0) || !(p.S >= 0.0) || !(p.n > 0.0)) {
    throw DomainError("solver needs B >= 0, S >= 0, n > 0");
  }
}

void Integrator::reset(std::span<const double> h, double t) {
  check_state(h, grid_);
  for (double v : h) {
    if (!(v >= 0.0)) throw DomainError("heights must be nonnegative");
  }
  std::copy(h.begin(), h.end(), h_.begin());
  t_ = t;
}

double Integrator::advance() {
  const std::size_t n = grid_.nx;
  const double dx = grid_.dx;
  centered_slopes(h_, dx, hx_);
  const auto bounds = simd::flux_terms(h_, hx_, consts_, q_);
  q_.front() = 1.0;
  q_.back() = 0.0;
  const double dt = dt_from_bounds(bounds, dx, config_.Cd, dt_max_);
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw NumericalError("non-finite time step at t = " + std::to_string(t_) +
                         "; the run is unstable, try a smaller Cd");
  }

  const double ratio = dt / dx;
  double clamped = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double v = h_[i] - ratio * (q_[i] - q_[i - 1]);
    if (!(v >= 0.0)) {
      if (std::isnan(v)) {
        throw NumericalError("NaN in state at node " + std::to_string(i) + ", t = " + std::to_string(t_) +
                             "; the run is unstable, try a smaller Cd");
      }
      clamped -= (i + 1 == n ? 0.5 : 1.0) * v;
      v = 0.0;
    }
    h_[i] = v;
  }
  clamped_mass_ += clamped * dx;
  h_[0] = solve_h0(h_[1], dx, params_, {}, steps_ > 0 ? std::optional<double>(h_[0]) : std::nullopt);
  last_residual_ = std::abs(boundary_flux(h_[0], h_[1], dx, params_) - 1.0);
  t_ += dt;
  ++steps_;
  return dt;
}

StepOutput step(std::span<const double> h, const Grid& grid, const RheoParams& p, const SolverConfig& config) {
  SolverConfig cfg = config;
  cfg.nx = grid.nx;
  Integrator integ(p, cfg);
  integ.reset(h);
  const double dt = integ.advance();
  return {std::vector<double>(integ.state().begin(), integ.state().end()), dt};
}

SolverRun run_to_wall_touch(const RheoParams& p, const SolverConfig& config, const StepObserver& observer) {
  Integrator integ(p, config);
  const double threshold = config.wall_touch_threshold;
  const std::size_t last = config.nx - 1;

  SolverRun run;
  double dt_min = std::numeric_limits<double>::infinity();
  double dt_max = 0.0;
  double dt_sum = 0.0;
  double prev_last = 0.0;
  double max_residual = 0.0;

  while (integ.state()[last] < threshold) {
    if (integ.steps() >= config.max_steps) {
      std::ostringstream os;
      os << "no wall-touch after " << integ.steps() << " steps (t = " << integ.time() << ", B = " << p.B
         << ", S = " << p.S << ", n = " << p.n << ")";
      throw NumericalError(os.str());
    }
    prev_last = integ.state()[last];
    const double dt = integ.advance();
    dt_min = std::min(dt_min, dt);
    dt_max = std::max(dt_max, dt);
    dt_sum += dt;
    max_residual = std::max(max_residual, integ.last_boundary_residual());
    if (observer) {
      observer(StepRecord{integ.state(), integ.time(), dt, integ.steps()});
    }
  }

  run.final.h.assign(integ.state().begin(), integ.state().end());
  run.final.t = integ.time();
  run.final.params = p;
  run.final.provenance = Provenance::pde;
  run.wall_touch_time = integ.time();
  run.steps_taken = integ.steps();
  run.dt = {dt_min, dt_max, run.steps_taken ? dt_sum / static_cast<double>(run.steps_taken) : 0.0};
  run.previous_last_height = prev_last;
  run.clamped_mass = integ.clamped_mass();
  run.max_boundary_residual = max_residual;
  return run;
}

double trapezoid_mass(std::span<const double> h, double dx) {
  if (h.size() < 2) return 0.0;
  double s = 0.5 * (h.front() + h.back());
  for (std::size_t i = 1; i + 1 < h.size(); ++i) s += h[i];
  return s * dx;
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit_loglog_slope: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

ConvergenceTable convergence_study(const RheoParams& p, std::span<const std::size_t> nx_list,
                                   const SolverRun& reference, const SolverConfig& base) {
  const std::size_t nx_ref = reference.final.h.size();
  for (std::size_t nx : nx_list) {
    if (nx < 3 || nx > nx_ref || (nx_ref - 1) % (nx - 1) != 0) {
      throw DomainError("convergence_study: nx = " + std::to_string(nx) + " does not share nodes with nx_ref = " +
                        std::to_string(nx_ref));
    }
  }
  ConvergenceTable table;
  table.nx_ref = nx_ref;
  table.ref_wall_touch_time = reference.wall_touch_time;
  std::vector<double> dxs, errs;
  for (std::size_t nx : nx_list) {
    ConvergenceRow row;
    row.nx = nx;
    row.dx = 1.0 / static_cast<double>(nx - 1);
    if (nx == nx_ref) {
      row.wall_touch_time = reference.wall_touch_time;
      row.steps = reference.steps_taken;
    } else {
      SolverConfig cfg = base;
      cfg.nx = nx;
      cfg.dt_max.reset();
      const SolverRun run = run_to_wall_touch(p, cfg);
      const std::size_t stride = (nx_ref - 1) / (nx - 1);
      double s = 0.0;
      for (std::size_t i = 0; i < nx; ++i) {
        const double diff = run.final.h[i] - reference.final.h[i * stride];
        s += diff * diff;
      }
      row.l2_error = std::sqrt(s * row.dx);
      row.wall_touch_time = run.wall_touch_time;
      row.steps = run.steps_taken;
    }
    dxs.push_back(row.dx);
    errs.push_back(row.l2_error);
    table.rows.push_back(row);
  }
  table.order = fit_loglog_slope(dxs, errs);
  return table;
}

ConvergenceTable convergence_study(const RheoParams& p, std::span<const std::size_t> nx_list, std::size_t nx_ref,
                                   const SolverConfig& base) {
  SolverConfig cfg = base;
  cfg.nx = nx_ref;
  cfg.dt_max.reset();
  const SolverRun reference = run_to_wall_touch(p, cfg);
  return convergence_study(p, nx_list, reference, base);
}

}  // namespace hbfill
