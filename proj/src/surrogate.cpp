#include "hbfill/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hbfill/error.hpp"
#include "hbfill/io.hpp"

namespace hbfill {

std::string to_string(GridDescriptor::Kind k) { return k == GridDescriptor::Kind::regular ? "regular" : "random"; }

Json to_json(const GridDescriptor& g) {
  return Json{{"kind", to_string(g.kind)}, {"nB", g.nB}, {"nS", g.nS}, {"count", g.count}, {"seed", g.seed}};
}

GridDescriptor grid_from_json(const Json& j) {
  GridDescriptor g;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "regular") {
    g.kind = GridDescriptor::Kind::regular;
  } else if (kind == "random") {
    g.kind = GridDescriptor::Kind::random;
  } else {
    throw FormatError("unknown grid kind '" + kind + "'");
  }
  g.nB = j.value("nB", std::size_t{0});
  g.nS = j.value("nS", std::size_t{0});
  g.count = j.value("count", std::size_t{0});
  g.seed = j.value("seed", std::uint64_t{0});
  return g;
}

Eigen::MatrixXd TrainingSet::output_matrix() const {
  if (outputs.empty()) throw DomainError("training set is empty");
  if (outputs.size() != inputs.size()) throw DomainError("training set: inputs and outputs differ in length");
  const std::size_t m = nx();
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(outputs.size()), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    if (outputs[j].h.size() != m) throw DomainError("training set: profiles have different lengths");
    for (std::size_t i = 0; i < m; ++i) Y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = outputs[j].h[i];
  }
  return Y;
}

// ---------------------------------------------------------------------------
// PCA

Eigen::VectorXd PcaModel::project(const Eigen::VectorXd& y) const { return directions * y; }

Eigen::VectorXd PcaModel::reconstruct(const Eigen::VectorXd& alpha) const { return directions.transpose() * alpha; }

Eigen::VectorXd PcaModel::cumulative_explained_ratio() const {
  Eigen::VectorXd c(explained_variance.size());
  const double total = explained_variance.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < explained_variance.size(); ++k) {
    acc += explained_variance(k);
    c(k) = total > 0.0 ? acc / total : 1.0;
  }
  return c;
}

namespace {

void fix_sign(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

void check_p(int p, std::size_t r, std::size_t m) {
  if (p < 0 || static_cast<std::size_t>(p) + 1 > std::min(r, m)) {
    std::ostringstream os;
    os << "retained components p + 1 = " << p + 1 << " must lie in [1, min(r, m)] = [1, " << std::min(r, m) << "]";
    throw DomainError(os.str());
  }
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& Y, int p) {
  const auto r = static_cast<std::size_t>(Y.rows());
  const auto m = static_cast<std::size_t>(Y.cols());
  if (r < 2) throw DomainError("PCA needs at least 2 samples");
  check_p(p, r, m);

  PcaModel pca;
  pca.p = p;
  pca.mean = Y.colwise().mean().transpose();
  const Eigen::MatrixXd centered = Y.rowwise() - pca.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(r - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("PCA: eigendecomposition failed");
  const Eigen::Index mm = static_cast<Eigen::Index>(m);
  pca.directions.resize(mm, mm);
  pca.explained_variance.resize(mm);
  // Eigen returns ascending eigenvalues.
  for (Eigen::Index k = 0; k < mm; ++k) {
    const Eigen::Index src = mm - 1 - k;
    pca.explained_variance(k) = std::max(eig.eigenvalues()(src), 0.0);
    pca.directions.row(k) = eig.eigenvectors().col(src).transpose();
    fix_sign(pca.directions.row(k));
  }
  pca.degenerate = pca.explained_variance.sum() == 0.0;
  pca.pc_means = pca.directions * pca.mean;
  return pca;
}

PcaModel fit_pca(const TrainingSet& training, int p) { return fit_pca(training.output_matrix(), p); }

PcaModel identity_pca(const Eigen::MatrixXd& Y) {
  if (Y.rows() < 1) throw DomainError("identity PCA needs data");
  PcaModel pca;
  const Eigen::Index m = Y.cols();
  pca.mean = Y.colwise().mean().transpose();
  pca.directions = Eigen::MatrixXd::Identity(m, m);
  pca.pc_means = pca.mean;
  if (Y.rows() > 1) {
    const Eigen::MatrixXd centered = Y.rowwise() - pca.mean.transpose();
    pca.explained_variance = centered.colwise().squaredNorm().transpose() / static_cast<double>(Y.rows() - 1);
  } else {
    pca.explained_variance = Eigen::VectorXd::Zero(m);
  }
  pca.p = static_cast<int>(m) - 1;
  pca.degenerate = pca.explained_variance.sum() == 0.0;
  return pca;
}

// ---------------------------------------------------------------------------
// PCE

Eigen::VectorXd PceModel::predict(double Bt, double St) const {
  Eigen::VectorXd psi(static_cast<Eigen::Index>(multi_indices.size()));
  basis_eval(multi_indices, Bt, St, std::span<double>(psi.data(), static_cast<std::size_t>(psi.size())));
  return coefficients * psi;
}

Eigen::MatrixXd design_matrix(const std::vector<MultiIndex>& indices, const Eigen::MatrixXd& X) {
  if (X.cols() != 2) throw DomainError("design_matrix: inputs must be r x 2");
  Eigen::MatrixXd Psi(X.rows(), static_cast<Eigen::Index>(indices.size()));
  std::vector<double> row(indices.size());
  for (Eigen::Index j = 0; j < X.rows(); ++j) {
    basis_eval(indices, X(j, 0), X(j, 1), row);
    for (std::size_t q = 0; q < row.size(); ++q) Psi(j, static_cast<Eigen::Index>(q)) = row[q];
  }
  return Psi;
}

PceModel fit_pce(const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, int beta) {
  if (X.rows() != targets.rows()) throw DomainError("fit_pce: inputs and targets differ in row count");
  const std::size_t l = basis_size(beta);
  const auto r = static_cast<std::size_t>(X.rows());
  if (r < l) {
    std::ostringstream os;
    os << "under-determined PCE: " << r << " samples < " << l << " coefficients for beta = " << beta;
    throw DomainError(os.str());
  }
  PceModel pce;
  pce.beta = beta;
  pce.multi_indices = total_degree_indices(beta);
  const Eigen::MatrixXd Psi = design_matrix(pce.multi_indices, X);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Psi);
  if (qr.rank() < static_cast<Eigen::Index>(l)) {
    std::ostringstream os;
    os << "PCE design matrix is rank deficient (rank " << qr.rank() << " < " << l << ")";
    throw NumericalError(os.str());
  }
  const Eigen::MatrixXd C = qr.solve(targets);  // l x K
  pce.coefficients = C.transpose();
  const Eigen::MatrixXd resid = targets - Psi * C;
  pce.train_rms = (resid.colwise().squaredNorm() / static_cast<double>(r)).cwiseSqrt().transpose();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Psi);
  const auto& sv = svd.singularValues();
  pce.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : HUGE_VAL;
  return pce;
}

namespace {

Eigen::MatrixXd standardized_inputs(const TrainingSet& t, const ParamDomain& domain) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(t.inputs.size()), 2);
  for (std::size_t j = 0; j < t.inputs.size(); ++j) {
    const StdPoint s = standardize(t.inputs[j], domain);
    X(static_cast<Eigen::Index>(j), 0) = s.Bt;
    X(static_cast<Eigen::Index>(j), 1) = s.St;
  }
  return X;
}

}  // namespace

PceModel fit_pce(const TrainingSet& training, const PcaModel& pca, int beta, const ParamDomain& domain) {
  const Eigen::MatrixXd Y = training.output_matrix();
  const Eigen::MatrixXd alpha = Y * pca.directions.topRows(pca.retained()).transpose();  // r x (p+1)
  return fit_pce(standardized_inputs(training, domain), alpha, beta);
}

// ---------------------------------------------------------------------------
// Surrogate

void Surrogate::evaluate_standardized(double Bt, double St, Eigen::VectorXd& out) const {
  const Eigen::VectorXd theta = pce.predict(Bt, St);
  if (!uses_pca) {
    out = theta;
    return;
  }
  const Eigen::Index k = pca.retained();
  out = pca.mean;
  out.noalias() += pca.directions.topRows(k).transpose() * (theta - pca.pc_means.head(k));
}

HeightProfile Surrogate::evaluate(const RheoParams& params, bool* extrapolated) const {
  if (std::abs(params.n - n) > 1e-12) {
    std::ostringstream os;
    os << "surrogate was trained for n = " << n << ", asked for n = " << params.n;
    throw DomainError(os.str());
  }
  const StdPoint s = standardize_unchecked(params.B, params.S, domain);
  if (extrapolated) *extrapolated = !domain.contains(params.B, params.S);
  Eigen::VectorXd y;
  evaluate_standardized(s.Bt, s.St, y);
  HeightProfile out;
  out.h.assign(y.data(), y.data() + y.size());
  out.params = params;
  out.provenance = Provenance::surrogate;
  return out;
}

Surrogate train_surrogate(const TrainingSet& training, const SurrogateOptions& opt) {
  if (training.size() < 2) throw DomainError("training set needs at least 2 samples");
  const double n = training.inputs.front().n;
  for (const auto& p : training.inputs) {
    if (p.n != n) throw DomainError("training set mixes values of n");
  }
  Surrogate s;
  s.domain = opt.domain;
  s.n = n;
  s.nx = training.nx();
  s.uses_pca = opt.use_pca;
  s.training = {training.grid, training.solver, training.size()};

  const Eigen::MatrixXd Y = training.output_matrix();
  const Eigen::MatrixXd X = standardized_inputs(training, opt.domain);
  if (opt.use_pca) {
    s.pca = fit_pca(Y, opt.p);
    const Eigen::MatrixXd alpha = Y * s.pca.directions.topRows(s.pca.retained()).transpose();
    s.pce = fit_pce(X, alpha, opt.beta);
  } else {
    s.pca = identity_pca(Y);
    s.pce = fit_pce(X, Y, opt.beta);
  }
  s.train_max_error = validate(s, training).stats.max;
  return s;
}

ValidationReport validate(const Surrogate& s, const TrainingSet& validation) {
  ValidationReport rep;
  rep.errors.reserve(validation.size());
  for (std::size_t j = 0; j < validation.size(); ++j) {
    const auto& truth = validation.outputs[j].h;
    if (truth.size() != s.nx) throw DomainError("validation profile length does not match the surrogate nx");
    const HeightProfile pred = s.evaluate(validation.inputs[j]);
    double ss = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double d = truth[i] - pred.h[i];
      ss += d * d;
    }
    rep.errors.push_back(std::sqrt(ss));
    rep.params.push_back(validation.inputs[j]);
  }
  rep.stats = summarize(rep.errors);
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(format_double(v(i)));
  return a;
}

Eigen::VectorXd vec_from(const Json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_double(a[i]);
  return v;
}

Json mat_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(format_double(m(i, j)));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd mat_from(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("matrix data size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = parse_double(data[k++]);
  return m;
}


}  // namespace

std::string surrogate_to_json(const Surrogate& s) {
  Json j;
  j["format_version"] = Surrogate::kFormatVersion;
  j["n"] = format_double(s.n);
  j["nx"] = s.nx;
  j["domain"] = {
      {"B_bounds", {format_double(s.domain.B_min), format_double(s.domain.B_max)}},
      {"S_bounds", {format_double(s.domain.S_min), format_double(s.domain.S_max)}},
      {"offsets", {format_double(s.domain.B_offset), format_double(s.domain.S_offset)}},
      {"divisors", {format_double(s.domain.B_divisor), format_double(s.domain.S_divisor)}},
  };
  j["beta"] = s.pce.beta;
  j["p"] = s.pca.p;
  j["uses_pca"] = s.uses_pca;
  Json idx = Json::array();
  for (const auto& m : s.pce.multi_indices) idx.push_back({m.a, m.b});
  j["multi_indices"] = std::move(idx);
  j["coefficients"] = mat_json(s.pce.coefficients);
  j["pca"] = {
      {"mean", vec_json(s.pca.mean)},
      {"directions", mat_json(s.pca.directions)},
      {"pc_means", vec_json(s.pca.pc_means)},
      {"explained_variance", vec_json(s.pca.explained_variance)},
      {"degenerate", s.pca.degenerate},
  };
  j["fit"] = {{"train_rms", vec_json(s.pce.train_rms)}, {"condition_number", format_double(s.pce.condition_number)},
              {"train_max_error", format_double(s.train_max_error)}};
  j["training_metadata"] = {
      {"grid", to_json(s.training.grid)},
      {"seed", s.training.grid.seed},
      {"solver", to_json(s.training.solver)},
      {"samples", s.training.samples},
  };
  return j.dump(1) + "\n";
}

Surrogate surrogate_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("surrogate file is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != Surrogate::kFormatVersion) {
      throw FormatError("unsupported surrogate format_version " + std::to_string(version));
    }
    Surrogate s;
    s.n = parse_double(j.at("n"));
    s.nx = j.at("nx").get<std::size_t>();
    const Json& d = j.at("domain");
    s.domain.B_min = parse_double(d.at("B_bounds").at(0));
    s.domain.B_max = parse_double(d.at("B_bounds").at(1));
    s.domain.S_min = parse_double(d.at("S_bounds").at(0));
    s.domain.S_max = parse_double(d.at("S_bounds").at(1));
    s.domain.B_offset = parse_double(d.at("offsets").at(0));
    s.domain.S_offset = parse_double(d.at("offsets").at(1));
    s.domain.B_divisor = parse_double(d.at("divisors").at(0));
    s.domain.S_divisor = parse_double(d.at("divisors").at(1));
    s.pce.beta = j.at("beta").get<int>();
    s.uses_pca = j.value("uses_pca", true);
    for (const auto& m : j.at("multi_indices")) s.pce.multi_indices.push_back({m.at(0).get<int>(), m.at(1).get<int>()});
    s.pce.coefficients = mat_from(j.at("coefficients"));
    const Json& pca = j.at("pca");
    s.pca.p = j.at("p").get<int>();
    s.pca.mean = vec_from(pca.at("mean"));
    s.pca.directions = mat_from(pca.at("directions"));
    s.pca.pc_means = vec_from(pca.at("pc_means"));
    s.pca.explained_variance = vec_from(pca.at("explained_variance"));
    s.pca.degenerate = pca.value("degenerate", false);
    if (j.contains("fit")) {
      s.pce.train_rms = vec_from(j["fit"].at("train_rms"));
      s.pce.condition_number = parse_double(j["fit"].at("condition_number"));
      if (j["fit"].contains("train_max_error")) s.train_max_error = parse_double(j["fit"].at("train_max_error"));
    }
    const Json& meta = j.at("training_metadata");
    s.training.grid = grid_from_json(meta.at("grid"));
    s.training.solver = solver_config_from_json(meta.at("solver"));
    s.training.samples = meta.value("samples", std::size_t{0});

    const auto m = static_cast<Eigen::Index>(s.nx);
    if (s.pca.mean.size() != m || s.pca.directions.rows() != m || s.pca.directions.cols() != m ||
        s.pca.pc_means.size() != m) {
      throw FormatError("surrogate PCA block does not match nx");
    }
    if (s.pce.coefficients.rows() != s.pca.retained() ||
        s.pce.coefficients.cols() != static_cast<Eigen::Index>(s.pce.multi_indices.size())) {
      throw FormatError("surrogate coefficient matrix has the wrong shape");
    }
    return s;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("surrogate file is missing a field: ") + e.what());
  }
}

void save_surrogate(const Surrogate& s, const std::filesystem::path& path) { write_text(path, surrogate_to_json(s)); }

Surrogate load_surrogate(const std::filesystem::path& path) { return surrogate_from_json(read_text(path)); }

}  // namespace hbfill
