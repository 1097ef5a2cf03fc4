#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "hbfill/error.hpp"
#include "hbfill/solver.hpp"
#include "oracles.hpp"

using namespace hbfill;

TEST_CASE("grid") {
  const Grid g = Grid::uniform(301);
  CHECK(g.dx * 300.0 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.x(300) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(Grid::uniform(2), DomainError);
}

TEST_CASE("spatial fluxes examples") {
  const Grid g = Grid::uniform(11);
  const RheoParams p{2.0, 4.0, 1.0};
  std::vector<double> h(11, 0.0);
  auto q = spatial_fluxes(h, g, p);
  CHECK(q[0] == 1.0);
  for (std::size_t i = 1; i < 11; ++i) CHECK(q[i] == 0.0);

  std::fill(h.begin(), h.end(), p.B / p.S);  // unyielded plateau
  q = spatial_fluxes(h, g, p);
  for (std::size_t i = 1; i + 1 < 11; ++i) CHECK(q[i] == 0.0);

  for (std::size_t i = 0; i < 11; ++i) h[i] = 1.0 + p.S * g.x(i);  // hx == S
  q = spatial_fluxes(h, g, p);
  for (std::size_t i = 1; i + 1 < 11; ++i) CHECK(q[i] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(q.back() == 0.0);
}

TEST_CASE("stable dt examples and oracle") {
  const Grid g = Grid::uniform(101);
  const RheoParams p{5.0, 3.0, 0.8};
  SolverConfig cfg;
  cfg.nx = 101;
  std::vector<double> h(101, 0.0);
  CHECK(stable_dt(h, g, p, cfg) == cfg.resolved_dt_max());

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    for (double& v : h) v = u(rng);
    for (double n : {0.4, 0.8, 1.0, 1.2}) {
      const RheoParams pp{5.0, 3.0, n};
      const double ref = oracle::dt(h, g.dx, pp.B, pp.S, pp.n, cfg.Cd, cfg.resolved_dt_max());
      CHECK(stable_dt(h, g, pp, cfg) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("time step combination") {
  CHECK(dt_from_bounds({1.0, 0.0}, 0.01, 0.5, 1.0) == doctest::Approx(0.005));
  CHECK(dt_from_bounds({0.0, 2.0}, 0.01, 0.5, 1.0) == doctest::Approx(0.5 * 1e-4 / 2.0));
  CHECK(dt_from_bounds({0.0, 0.0}, 0.01, 0.5, 0.01) == 0.01);
  CHECK(dt_from_bounds({1e-6, 0.0}, 0.01, 0.5, 0.01) == 0.01);
}

TEST_CASE("solve_h0 residual, monotonicity and bisection") {
  const RheoParams p{10.0, 1.0, 1.0};
  const double dx = 1.0 / 300.0;
  const double h0 = solve_h0(0.0, dx, p);
  CHECK(std::abs(boundary_flux(h0, 0.0, dx, p) - 1.0) <= 1e-10);
  CHECK(h0 == doctest::Approx(oracle::bisect_h0(0.0, dx, p.B, p.S, p.n)).epsilon(1e-9));

  const double lb = h0_lower_bound(0.0, dx, p);
  double prev = boundary_flux(lb, 0.0, dx, p);
  for (int k = 1; k <= 400; ++k) {
    const double x = lb + 0.01 * k;
    const double f = boundary_flux(x, 0.0, dx, p);
    CHECK(f > prev);
    prev = f;
  }

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uh(0.0, 3.0), uB(0.5, 250.0), uS(0.05, 120.0), un(0.2, 1.2), ud(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const RheoParams q{uB(rng), uS(rng), un(rng)};
    const double h1 = uh(rng), d = 1.0 / (50.0 + 1000.0 * ud(rng));
    const double r = solve_h0(h1, d, q);
    CHECK(std::abs(boundary_flux(r, h1, d, q) - 1.0) <= 1e-10);
    const double hint = r * (1.0 + 0.01 * (ud(rng) - 0.5));
    CHECK(std::abs(boundary_flux(solve_h0(h1, d, q, {}, hint), h1, d, q) - 1.0) <= 1e-10);
  }
}

TEST_CASE("step from rest touches only the first two nodes") {
  const Grid g = Grid::uniform(51);
  const RheoParams p{3.0, 2.0, 0.8};
  SolverConfig cfg;
  const std::vector<double> h(51, 0.0);
  const StepOutput out = step(h, g, p, cfg);
  CHECK(out.h[0] > 0.0);
  CHECK(out.h[1] > 0.0);
  for (std::size_t i = 2; i < 51; ++i) CHECK(out.h[i] == 0.0);
  // Interior accounting: the upwind divergence telescopes to dt * q0.
  const double interior = std::accumulate(out.h.begin() + 1, out.h.end(), 0.0) * g.dx;
  CHECK(interior == doctest::Approx(out.dt * 1.0).epsilon(1e-13));
}

TEST_CASE("step equals the reference stencil") {
  std::mt19937_64 rng(8);
  for (double n : {0.5, 0.8, 1.0}) {
    const RheoParams p{20.0, 5.0, n};
    SolverConfig cfg;
    cfg.nx = 61;
    Integrator integ(p, cfg);
    for (int k = 0; k < 3000; ++k) integ.advance();  // a developed profile
    std::vector<double> h(integ.state().begin(), integ.state().end());
    const auto ref = oracle::step(h, p.B, p.S, p.n, cfg.Cd, cfg.resolved_dt_max());
    const StepOutput out = step(h, Grid::uniform(61), p, cfg);
    CHECK(out.dt == doctest::Approx(ref.dt).epsilon(1e-12));
    for (std::size_t i = 1; i < h.size(); ++i) {
      CHECK(out.h[i] == doctest::Approx(ref.h[i]).epsilon(1e-12).scale(1e-12));
    }
    CHECK(out.h[0] == doctest::Approx(ref.h[0]).epsilon(1e-9));
  }
}

TEST_CASE("run to wall touch: stopping rule, positivity, determinism") {
  const RheoParams p{10.0, 10.0, 1.0};
  SolverConfig cfg;
  cfg.nx = 51;
  bool nonneg = true;
  double last_before = -1.0;
  double last_now = -1.0;
  const SolverRun run = run_to_wall_touch(p, cfg, [&](const StepRecord& r) {
    for (double v : r.h) nonneg = nonneg && v >= 0.0;
    last_before = last_now;
    last_now = r.h.back();
  });
  CHECK(nonneg);
  CHECK(run.final.h.back() >= cfg.wall_touch_threshold);
  CHECK(run.previous_last_height < cfg.wall_touch_threshold);
  CHECK(last_before == run.previous_last_height);
  CHECK(run.final.t == run.wall_touch_time);
  CHECK(run.dt.min <= run.dt.mean);
  CHECK(run.dt.mean <= run.dt.max);

  const SolverRun again = run_to_wall_touch(p, cfg);
  CHECK(again.final.h == run.final.h);
  CHECK(again.wall_touch_time == run.wall_touch_time);
}

TEST_CASE("wall-touch time is insensitive to the threshold") {
  const RheoParams p{20.0, 30.0, 1.0};
  SolverConfig cfg;
  cfg.nx = 101;
  std::vector<double> times;
  for (double th : {1e-10, 1e-8, 1e-6}) {
    cfg.wall_touch_threshold = th;
    times.push_back(run_to_wall_touch(p, cfg).wall_touch_time);
  }
  CHECK(times[0] <= times[1]);
  CHECK(times[1] <= times[2]);
  CHECK((times[2] - times[0]) / times[1] < 0.01);
}

TEST_CASE("max steps exhaustion is reported") {
  SolverConfig cfg;
  cfg.nx = 51;
  cfg.max_steps = 10;
  CHECK_THROWS_WITH_AS(run_to_wall_touch({10.0, 10.0, 1.0}, cfg), doctest::Contains("no wall-touch"), NumericalError);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.Cd = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg.Cd = 0.6;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg.Cd = 0.5;
  cfg.wall_touch_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("convergence study: self-reference and slope fit") {
  const std::vector<std::size_t> list{41};
  const ConvergenceTable t = convergence_study({10.0, 10.0, 1.0}, list, 41);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].l2_error == 0.0);

  const std::vector<double> x{0.1, 0.05, 0.025}, y{0.3, 0.15, 0.075};
  CHECK(fit_loglog_slope(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> y2{0.1 * std::pow(0.1, 0.6), 0.1 * std::pow(0.05, 0.6), 0.1 * std::pow(0.025, 0.6)};
  CHECK(fit_loglog_slope(x, y2) == doctest::Approx(0.6).epsilon(1e-12));

  const std::vector<std::size_t> bad{40};
  CHECK_THROWS_AS(convergence_study({10.0, 10.0, 1.0}, bad, 41), DomainError);
}

TEST_CASE("trapezoid mass") {
  const std::vector<double> h{1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(trapezoid_mass(h, 0.25) == doctest::Approx(1.0));
  const std::vector<double> lin{0.0, 0.25, 0.5, 0.75, 1.0};
  CHECK(trapezoid_mass(lin, 0.25) == doctest::Approx(0.5));
}
