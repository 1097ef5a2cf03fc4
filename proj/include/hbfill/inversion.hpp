#pragma once

/// Estimation of (B, S) from a wall-touch profile by Nelder-Mead over the
/// L2 misfit against a surrogate, and the synthetic-noise study built on it.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hbfill/rheology.hpp"
#include "hbfill/solver.hpp"
#include "hbfill/stats.hpp"
#include "hbfill/surrogate.hpp"

namespace hbfill {

struct NoiseSpec {
  double alpha = 0.0;  ///< relative amplitude: std of node i is alpha * h_i
  std::uint64_t seed = 0;
};

/// h_i + N(0, (alpha h_i)^2), clamped at 0. Deterministic for a given seed.
HeightProfile add_noise(const HeightProfile& profile, const NoiseSpec& spec);

struct Observation {
  HeightProfile profile;
  std::optional<RheoParams> known_truth;
};

/// ||S(B, S) - observed||_2 against the surrogate, evaluated in standardized
/// coordinates. Points outside [-1, 1]^2 are clamped onto the square for the
/// surrogate and charged penalty_weight * (distance to the square)^2.
class Misfit {
 public:
  Misfit(const Surrogate& surrogate, std::span<const double> observed, double penalty_weight = 0.0);

  double at_standardized(double Bt, double St) const;
  double operator()(double B, double S) const;

  double penalty_weight() const { return penalty_weight_; }
  void set_penalty_weight(double w) { penalty_weight_ = w; }

 private:
  const Surrogate* surrogate_;
  Eigen::VectorXd observed_;
  double penalty_weight_;
  mutable Eigen::VectorXd work_;
};

/// Free-function form of Misfit for a single candidate.
double misfit(double B, double S, const Observation& obs, const Surrogate& surrogate, double penalty_weight = 0.0);

struct NelderMeadOptions {
  int max_iter = 400;
  double initial_step = 0.1;
  double xtol = 1e-8;  ///< simplex diameter
  double ftol = 1e-8;  ///< objective spread across vertices
  bool record_trace = false;
};

struct NelderMeadPoint {
  double x = 0.0;
  double y = 0.0;
  double f = 0.0;
};

struct NelderMeadResult {
  NelderMeadPoint best;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<NelderMeadPoint> initial_vertices;
  std::vector<NelderMeadPoint> trace;  ///< best vertex after each iteration
};

/// Nelder-Mead on a function of two variables (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2). The initial simplex is the start plus the
/// start shifted by initial_step along each axis. Converged when the
/// diameter and the spread both fall below tolerance, or when the spread
/// is exactly zero (flat objective).
NelderMeadResult nelder_mead(const std::function<double(double, double)>& f, double x0, double y0,
                             const NelderMeadOptions& options = {});

struct EstimateOptions {
  NelderMeadOptions nm;
  /// Standardized starting points; empty means the center plus (+-0.5, 0)
  /// and (0, +-0.5).
  std::vector<StdPoint> starts;
  bool multi_start = true;
  /// Penalty weight as a multiple of the misfit at each start.
  double penalty_factor = 10.0;
};

struct InversionResult {
  RheoParams estimate;
  double objective = 0.0;
  int iterations = 0;  ///< iterations of the winning start
  int total_iterations = 0;
  bool converged = false;
  std::optional<double> relative_error;
  std::vector<NelderMeadPoint> trace;  ///< standardized (Bt, St, f)
  bool at_domain_boundary = false;     ///< estimate clamped onto the domain edge
  bool low_slope = false;              ///< S below 0.1, outside the commonly trusted range
};

/// || ((B_true - B_est)/B_true, (S_true - S_est)/S_true) ||_2
double relative_error(const RheoParams& truth, const RheoParams& estimate);

/// Resamples the observation onto the surrogate grid if needed, runs
/// Nelder-Mead from each start and keeps the lowest misfit.
InversionResult estimate_params(const Observation& obs, const Surrogate& surrogate, const EstimateOptions& options = {});

struct NoiseStudyOptions {
  std::vector<double> alphas{0.0, 0.02, 0.05, 0.10};
  std::size_t couples = 50;
  std::uint64_t seed = 1;
  /// If set, only couples in the central fraction of each range are used.
  std::optional<double> inner_fraction;
  std::size_t workers = 1;
  std::size_t overlay_couples = 3;
  EstimateOptions estimate;
};

struct NoiseStudyRow {
  double alpha = 0.0;
  ErrorStats stats;
  std::vector<double> errors;  ///< one per successful couple, in couple order
  std::size_t failures = 0;
  std::size_t not_converged = 0;
};

struct OverlayCurve {
  std::size_t couple = 0;  ///< index into the validation set
  RheoParams truth;
  RheoParams estimate;
  double alpha = 0.0;
  std::vector<double> clean, noisy, fitted;
};

struct NoiseStudyReport {
  std::vector<std::size_t> couples;  ///< indices into the validation set
  std::vector<NoiseStudyRow> rows;
  std::vector<OverlayCurve> overlays;
  std::uint64_t seed = 0;
};

/// Derived per-task seed: independent of scheduling and worker count.
std::uint64_t task_seed(std::uint64_t master, std::uint64_t couple, std::uint64_t alpha_index);

NoiseStudyReport noise_study(const Surrogate& surrogate, const TrainingSet& validation, const NoiseStudyOptions& options);

/// Runs fn(i) for i in [0, count) on `workers` threads. Exceptions from
/// tasks are rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace hbfill
