#pragma once

/// PCE-PCA metamodel of the wall-touch profile as a function of (B, S).
///
/// Training profiles are compressed by PCA; the leading p + 1 principal
/// components are each regressed on a total-degree Legendre basis over the
/// standardized inputs. The remaining components are frozen at their sample
/// means, so a prediction is
///   y(B, S) = sum_{k<=p} theta_k(B, S) phi_k + sum_{k>p} mean(alpha_k) phi_k.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbfill/io.hpp"
#include "hbfill/legendre.hpp"
#include "hbfill/rheology.hpp"
#include "hbfill/solver.hpp"
#include "hbfill/stats.hpp"

namespace hbfill {

struct GridDescriptor {
  enum class Kind { regular, random };
  Kind kind = Kind::regular;
  std::size_t nB = 0;      ///< regular only
  std::size_t nS = 0;      ///< regular only
  std::size_t count = 0;   ///< total couples
  std::uint64_t seed = 0;  ///< random only
};

std::string to_string(GridDescriptor::Kind k);
Json to_json(const GridDescriptor& g);
GridDescriptor grid_from_json(const Json& j);

struct TrainingSet {
  std::vector<RheoParams> inputs;
  std::vector<HeightProfile> outputs;
  GridDescriptor grid;
  SolverConfig solver;

  std::size_t size() const { return inputs.size(); }
  std::size_t nx() const { return outputs.empty() ? 0 : outputs.front().h.size(); }
  /// r x m matrix of profiles, one per row. Throws on ragged data.
  Eigen::MatrixXd output_matrix() const;
};

struct PcaModel {
  Eigen::MatrixXd directions;          ///< m x m, row k is phi_k
  Eigen::VectorXd mean;                ///< sample mean of the outputs
  Eigen::VectorXd pc_means;            ///< mean(alpha_k) = phi_k . mean
  Eigen::VectorXd explained_variance;  ///< eigenvalues, nonincreasing
  int p = 0;                           ///< retained components are 0..p
  bool degenerate = false;             ///< all training outputs identical

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  int retained() const { return p + 1; }
  /// alpha = phi y
  Eigen::VectorXd project(const Eigen::VectorXd& y) const;
  /// y = phi^T alpha
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& alpha) const;
  /// Fraction of total variance carried by components 0..k, for every k.
  Eigen::VectorXd cumulative_explained_ratio() const;
};

/// PCA of the r x m output matrix from the explicitly formed sample
/// covariance (1/(r-1)). Each direction's first nonzero entry is positive.
PcaModel fit_pca(const Eigen::MatrixXd& outputs, int p);
PcaModel fit_pca(const TrainingSet& training, int p);

/// Identity "PCA" (one component per node), used to fit the per-node PCE.
PcaModel identity_pca(const Eigen::MatrixXd& outputs);

struct PceModel {
  std::vector<MultiIndex> multi_indices;
  Eigen::MatrixXd coefficients;  ///< (p+1) x l
  int beta = 0;
  Eigen::VectorXd train_rms;     ///< per-target RMS residual on the fit data
  double condition_number = 0.0; ///< of the r x l design matrix

  Eigen::VectorXd predict(double Bt, double St) const;
};

/// r x l design matrix psi_q(x_j) for standardized inputs (r x 2).
Eigen::MatrixXd design_matrix(const std::vector<MultiIndex>& indices, const Eigen::MatrixXd& std_inputs);

/// Least-squares coefficients for every column of `targets` (r x K) on the
/// total-degree basis of order beta. Needs r >= l; solved by column-pivoted
/// Householder QR.
PceModel fit_pce(const Eigen::MatrixXd& std_inputs, const Eigen::MatrixXd& targets, int beta);

/// Coefficients for the retained PCs of `pca` over the training inputs.
PceModel fit_pce(const TrainingSet& training, const PcaModel& pca, int beta,
                 const ParamDomain& domain = kDefaultDomain);

struct TrainingMetadata {
  GridDescriptor grid;
  SolverConfig solver;
  std::size_t samples = 0;
};

struct Surrogate {
  static constexpr int kFormatVersion = 1;

  PcaModel pca;
  PceModel pce;
  ParamDomain domain;
  double n = 1.0;
  std::size_t nx = 0;
  bool uses_pca = true;
  TrainingMetadata training;
  /// Largest Euclidean reconstruction error over the training samples.
  double train_max_error = 0.0;

  /// Profile at (B, S). `params.n` must match the trained n. Points outside
  /// the domain are evaluated anyway and flagged through `extrapolated`.
  HeightProfile evaluate(const RheoParams& params, bool* extrapolated = nullptr) const;

  /// Allocation-free evaluation at standardized coordinates.
  void evaluate_standardized(double Bt, double St, Eigen::VectorXd& out) const;
};

struct SurrogateOptions {
  int beta = 15;
  int p = 9;
  bool use_pca = true;
  ParamDomain domain = kDefaultDomain;
};

/// PCA then PCE on a training set generated at a single n.
Surrogate train_surrogate(const TrainingSet& training, const SurrogateOptions& options = {});

struct ValidationReport {
  ErrorStats stats;
  std::vector<double> errors;  ///< Euclidean norm of (solver - surrogate) per couple
  std::vector<RheoParams> params;
};

ValidationReport validate(const Surrogate& surrogate, const TrainingSet& validation);

/// JSON document with every number written as a round-trip decimal string.
std::string surrogate_to_json(const Surrogate& s);
Surrogate surrogate_from_json(const std::string& text);
void save_surrogate(const Surrogate& s, const std::filesystem::path& path);
Surrogate load_surrogate(const std::filesystem::path& path);

}  // namespace hbfill
