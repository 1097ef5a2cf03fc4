#include "hbfill/inversion.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "hbfill/error.hpp"
#include "hbfill/io.hpp"

namespace hbfill {

HeightProfile add_noise(const HeightProfile& profile, const NoiseSpec& spec) {
  if (!(spec.alpha >= 0.0)) throw DomainError("noise intensity must be >= 0");
  HeightProfile out = profile;
  out.provenance = Provenance::noisy;
  if (spec.alpha == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& h : out.h) {
    // Draw for every node so that node i always sees the i-th variate.
    const double z = normal(rng);
    h = std::max(h + spec.alpha * h * z, 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

Misfit::Misfit(const Surrogate& surrogate, std::span<const double> observed, double penalty_weight)
    : surrogate_(&surrogate), penalty_weight_(penalty_weight) {
  if (observed.size() != surrogate.nx) {
    throw DomainError("observation has " + std::to_string(observed.size()) + " nodes, surrogate expects " +
                      std::to_string(surrogate.nx));
  }
  observed_ = Eigen::Map<const Eigen::VectorXd>(observed.data(), static_cast<Eigen::Index>(observed.size()));
}

double Misfit::at_standardized(double Bt, double St) const {
  const double cb = std::clamp(Bt, -1.0, 1.0);
  const double cs = std::clamp(St, -1.0, 1.0);
  surrogate_->evaluate_standardized(cb, cs, work_);
  const double fit = (work_ - observed_).norm();
  const double d2 = (Bt - cb) * (Bt - cb) + (St - cs) * (St - cs);
  return fit + penalty_weight_ * d2;
}

double Misfit::operator()(double B, double S) const {
  const StdPoint s = standardize_unchecked(B, S, surrogate_->domain);
  return at_standardized(s.Bt, s.St);
}

double misfit(double B, double S, const Observation& obs, const Surrogate& surrogate, double penalty_weight) {
  return Misfit(surrogate, obs.profile.h, penalty_weight)(B, S);
}

// ---------------------------------------------------------------------------

NelderMeadResult nelder_mead(const std::function<double(double, double)>& f, double x0, double y0,
                             const NelderMeadOptions& opt) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  NelderMeadResult res;
  auto eval = [&](double x, double y) {
    ++res.evaluations;
    return NelderMeadPoint{x, y, f(x, y)};
  };

  std::array<NelderMeadPoint, 3> s = {eval(x0, y0), eval(x0 + opt.initial_step, y0), eval(x0, y0 + opt.initial_step)};
  res.initial_vertices.assign(s.begin(), s.end());
  auto by_f = [](const NelderMeadPoint& a, const NelderMeadPoint& b) { return a.f < b.f; };

  for (;;) {
    std::stable_sort(s.begin(), s.end(), by_f);
    const double spread = s[2].f - s[0].f;
    double diameter = 0.0;
    for (int k = 1; k < 3; ++k) diameter = std::max(diameter, std::hypot(s[k].x - s[0].x, s[k].y - s[0].y));
    if (spread == 0.0 || (spread <= opt.ftol && diameter <= opt.xtol)) {
      res.converged = true;
      break;
    }
    if (res.iterations >= opt.max_iter) break;
    ++res.iterations;

    const double cx = 0.5 * (s[0].x + s[1].x);
    const double cy = 0.5 * (s[0].y + s[1].y);
    const auto along = [&](double t) { return eval(cx + t * (s[2].x - cx), cy + t * (s[2].y - cy)); };

    const NelderMeadPoint r = along(-kReflect);
    if (r.f < s[0].f) {
      const NelderMeadPoint e = along(-kReflect * kExpand);
      s[2] = e.f < r.f ? e : r;
    } else if (r.f < s[1].f) {
      s[2] = r;
    } else {
      bool shrink = false;
      if (r.f < s[2].f) {
        const NelderMeadPoint c = along(-kReflect * kContract);
        if (c.f <= r.f) {
          s[2] = c;
        } else {
          shrink = true;
        }
      } else {
        const NelderMeadPoint c = along(kContract);
        if (c.f < s[2].f) {
          s[2] = c;
        } else {
          shrink = true;
        }
      }
      if (shrink) {
        for (int k = 1; k < 3; ++k) {
          s[k] = eval(s[0].x + kShrink * (s[k].x - s[0].x), s[0].y + kShrink * (s[k].y - s[0].y));
        }
      }
    }
    if (opt.record_trace) {
      res.trace.push_back(*std::min_element(s.begin(), s.end(), by_f));
    }
  }
  res.best = s[0];
  return res;
}

// ---------------------------------------------------------------------------

double relative_error(const RheoParams& truth, const RheoParams& est) {
  const double eb = (truth.B - est.B) / truth.B;
  const double es = (truth.S - est.S) / truth.S;
  return std::sqrt(eb * eb + es * es);
}

InversionResult estimate_params(const Observation& obs, const Surrogate& surrogate, const EstimateOptions& opt) {
  std::vector<double> observed = obs.profile.h;
  if (observed.size() != surrogate.nx) {
    std::vector<double> x(observed.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) / static_cast<double>(x.size() - 1);
    observed = resample_uniform(x, observed, surrogate.nx);
  }

  std::vector<StdPoint> starts = opt.starts;
  if (starts.empty()) {
    starts.push_back({0.0, 0.0});
    if (opt.multi_start) {
      starts.insert(starts.end(), {{0.5, 0.0}, {-0.5, 0.0}, {0.0, 0.5}, {0.0, -0.5}});
    }
  } else if (!opt.multi_start) {
    starts.resize(1);
  }

  Misfit objective(surrogate, observed);
  InversionResult best;
  bool have = false;
  double best_fit = HUGE_VAL;
  NelderMeadResult best_run;
  for (const StdPoint& st : starts) {
    objective.set_penalty_weight(0.0);
    const double f0 = objective.at_standardized(st.Bt, st.St);
    objective.set_penalty_weight(opt.penalty_factor * std::max(f0, 1e-12));
    NelderMeadResult run = nelder_mead([&](double x, double y) { return objective.at_standardized(x, y); }, st.Bt,
                                       st.St, opt.nm);
    best.total_iterations += run.iterations;
    const double cb = std::clamp(run.best.x, -1.0, 1.0);
    const double cs = std::clamp(run.best.y, -1.0, 1.0);
    objective.set_penalty_weight(0.0);
    const double fit = objective.at_standardized(cb, cs);
    if (!have || fit < best_fit) {
      have = true;
      best_fit = fit;
      best_run = std::move(run);
    }
  }

  const double cb = std::clamp(best_run.best.x, -1.0, 1.0);
  const double cs = std::clamp(best_run.best.y, -1.0, 1.0);
  const auto [B, S] = destandardize({cb, cs}, surrogate.domain);
  best.estimate = {std::clamp(B, surrogate.domain.B_min, surrogate.domain.B_max),
                   std::clamp(S, surrogate.domain.S_min, surrogate.domain.S_max), surrogate.n};
  best.objective = best_fit;
  best.iterations = best_run.iterations;
  best.converged = best_run.converged;
  best.trace = std::move(best_run.trace);
  constexpr double edge = 1.0 - 1e-6;
  best.at_domain_boundary = std::abs(best_run.best.x) >= edge || std::abs(best_run.best.y) >= edge;
  best.low_slope = best.estimate.S < 0.1;
  if (obs.known_truth) best.relative_error = relative_error(*obs.known_truth, best.estimate);
  return best;
}

// ---------------------------------------------------------------------------

std::uint64_t task_seed(std::uint64_t master, std::uint64_t couple, std::uint64_t alpha_index) {
  // splitmix64 over a combination of the three inputs.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ couple) ^ (alpha_index + 0x51ed27ULL));
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

NoiseStudyReport noise_study(const Surrogate& surrogate, const TrainingSet& validation,
                             const NoiseStudyOptions& opt) {
  if (validation.size() == 0) throw DomainError("noise study needs a nonempty validation set");
  NoiseStudyReport rep;
  rep.seed = opt.seed;

  std::vector<std::size_t> pool;
  const ParamDomain& d = surrogate.domain;
  for (std::size_t j = 0; j < validation.size(); ++j) {
    const RheoParams& p = validation.inputs[j];
    if (opt.inner_fraction) {
      const double fb = 0.5 * (1.0 - *opt.inner_fraction);
      const double bl = d.B_min + fb * (d.B_max - d.B_min), bh = d.B_max - fb * (d.B_max - d.B_min);
      const double sl = d.S_min + fb * (d.S_max - d.S_min), sh = d.S_max - fb * (d.S_max - d.S_min);
      if (p.B < bl || p.B > bh || p.S < sl || p.S > sh) continue;
    }
    pool.push_back(j);
  }
  std::mt19937_64 pick(opt.seed);
  std::shuffle(pool.begin(), pool.end(), pick);
  pool.resize(std::min(pool.size(), opt.couples));
  std::sort(pool.begin(), pool.end());
  rep.couples = pool;

  const std::size_t na = opt.alphas.size();
  const std::size_t nc = pool.size();
  struct Cell {
    bool ok = false;
    bool converged = false;
    double error = 0.0;
    RheoParams estimate;
    std::vector<double> noisy;
  };
  std::vector<Cell> cells(nc * na);
  parallel_for(nc * na, opt.workers, [&](std::size_t t) {
    const std::size_t ci = t / na, ai = t % na;
    const std::size_t j = pool[ci];
    Cell& cell = cells[t];
    try {
      Observation obs;
      obs.profile = add_noise(validation.outputs[j], {opt.alphas[ai], task_seed(opt.seed, j, ai)});
      obs.known_truth = validation.inputs[j];
      const InversionResult r = estimate_params(obs, surrogate, opt.estimate);
      cell.ok = true;
      cell.converged = r.converged;
      cell.error = *r.relative_error;
      cell.estimate = r.estimate;
      if (ci < opt.overlay_couples) cell.noisy = obs.profile.h;
    } catch (const Error&) {
      cell.ok = false;
    }
  });

  for (std::size_t ai = 0; ai < na; ++ai) {
    NoiseStudyRow row;
    row.alpha = opt.alphas[ai];
    for (std::size_t ci = 0; ci < nc; ++ci) {
      const Cell& c = cells[ci * na + ai];
      if (!c.ok) {
        ++row.failures;
        continue;
      }
      if (!c.converged) ++row.not_converged;
      row.errors.push_back(c.error);
    }
    row.stats = summarize(row.errors);
    rep.rows.push_back(std::move(row));
  }

  for (std::size_t ci = 0; ci < std::min(opt.overlay_couples, nc); ++ci) {
    for (std::size_t ai = 0; ai < na; ++ai) {
      const Cell& c = cells[ci * na + ai];
      if (!c.ok) continue;
      OverlayCurve ov;
      ov.couple = pool[ci];
      ov.truth = validation.inputs[pool[ci]];
      ov.estimate = c.estimate;
      ov.alpha = opt.alphas[ai];
      ov.clean = validation.outputs[pool[ci]].h;
      ov.noisy = c.noisy;
      ov.fitted = surrogate.evaluate(c.estimate).h;
      rep.overlays.push_back(std::move(ov));
    }
  }
  return rep;
}

}  // namespace hbfill
