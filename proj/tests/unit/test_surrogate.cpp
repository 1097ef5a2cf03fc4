#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "hbfill/error.hpp"
#include "hbfill/surrogate.hpp"

using namespace hbfill;

namespace {

// Cyclic Jacobi eigenvalue iteration on a dense symmetric matrix.
void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& values,
                  std::vector<std::vector<double>>& vectors) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  values.clear();
  vectors.clear();
  for (std::size_t i : order) {
    values.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    for (double x : col) {
      if (std::abs(x) > 1e-12) {
        if (x < 0) for (double& y : col) y = -y;
        break;
      }
    }
    vectors.push_back(col);
  }
}

// Gaussian elimination with partial pivoting.
std::vector<double> gauss_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

double P(int k, double x) {
  switch (k) {
    case 0: return 1.0;
    case 1: return x;
    case 2: return 0.5 * (3 * x * x - 1);
    case 3: return 0.5 * (5 * x * x * x - 3 * x);
  }
  return NAN;
}

// Smooth synthetic "profiles" over a small grid, driven by (B, S).
TrainingSet synthetic_set(std::size_t count, std::size_t m, std::uint64_t seed, double n = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uB(0.5, 250.0), uS(0.05, 120.0);
  TrainingSet t;
  t.grid.kind = GridDescriptor::Kind::random;
  t.grid.count = count;
  t.grid.seed = seed;
  t.solver.nx = m;
  for (std::size_t j = 0; j < count; ++j) {
    const RheoParams p{uB(rng), uS(rng), n};
    HeightProfile h;
    h.params = p;
    const double b = p.B / 250.0, s = p.S / 120.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(m - 1);
      h.h.push_back(1.0 + b * (1 - x) + 0.5 * s * x * x + 0.2 * b * s * std::sin(3 * x) + 0.05 * std::exp(-b * x));
    }
    t.inputs.push_back(p);
    t.outputs.push_back(std::move(h));
  }
  return t;
}

}  // namespace

TEST_CASE("PCA matches a brute-force covariance eigendecomposition") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd Y(10, 6);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) Y(i, j) = N(rng) * (1.0 + j);
  const PcaModel pca = fit_pca(Y, 5);

  std::vector<double> mean(6, 0.0);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 6; ++j) mean[j] += Y(i, j) / 10.0;
  std::vector<std::vector<double>> cov(6, std::vector<double>(6, 0.0));
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      for (int i = 0; i < 10; ++i) cov[a][b] += (Y(i, a) - mean[a]) * (Y(i, b) - mean[b]);
      cov[a][b] /= 9.0;
    }
  std::vector<double> vals;
  std::vector<std::vector<double>> vecs;
  jacobi_eigen(cov, vals, vecs);
  for (int k = 0; k < 6; ++k) {
    CHECK(pca.explained_variance(k) == doctest::Approx(vals[k]).epsilon(1e-8).scale(1e-8));
    for (int j = 0; j < 6; ++j) CHECK(pca.directions(k, j) == doctest::Approx(vecs[k][j]).scale(1.0).epsilon(1e-8));
  }
  for (int j = 0; j < 6; ++j) CHECK(pca.mean(j) == doctest::Approx(mean[j]).epsilon(1e-14));
}

TEST_CASE("PCA invariants") {
  const TrainingSet t = synthetic_set(40, 12, 2);
  const PcaModel pca = fit_pca(t, 11);
  const Eigen::MatrixXd I = pca.directions * pca.directions.transpose();
  CHECK((I - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff() <= 1e-10);
  for (Eigen::Index k = 1; k < 12; ++k) CHECK(pca.explained_variance(k) <= pca.explained_variance(k - 1));
  CHECK(pca.explained_variance.minCoeff() >= 0.0);
  for (const auto& h : t.outputs) {
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(h.h.data(), 12);
    const Eigen::VectorXd back = pca.reconstruct(pca.project(y));
    CHECK((back - y).norm() <= 1e-8 * y.norm());
  }
  const auto ratio = pca.cumulative_explained_ratio();
  CHECK(ratio(11) == doctest::Approx(1.0));
  for (Eigen::Index k = 1; k < 12; ++k) CHECK(ratio(k) >= ratio(k - 1));
  CHECK_THROWS_AS(fit_pca(t, 12), DomainError);
}

TEST_CASE("PCA degenerate and toy cases") {
  Eigen::MatrixXd same(5, 3);
  same.rowwise() = Eigen::RowVector3d(1.0, 2.0, 3.0);
  const PcaModel d = fit_pca(same, 1);
  CHECK(d.degenerate);
  CHECK(d.explained_variance.cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.reconstruct(d.pc_means) - d.mean).norm() <= 1e-14);

  Eigen::MatrixXd toy(4, 2);
  toy << 1, 0, -1, 0, 2, 0, -2, 0;
  const PcaModel t = fit_pca(toy, 0);
  CHECK(std::abs(t.directions(0, 0)) == doctest::Approx(1.0));
  CHECK(t.directions(0, 1) == doctest::Approx(0.0));
  CHECK(t.directions(0, 0) > 0.0);
}

TEST_CASE("PCE recovers a member of the model class") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int beta = 4;
  const auto idx = total_degree_indices(beta);
  Eigen::VectorXd c(static_cast<Eigen::Index>(idx.size()));
  for (Eigen::Index q = 0; q < c.size(); ++q) c(q) = u(rng);
  Eigen::MatrixXd X(40, 2), y(40, 1);
  for (int j = 0; j < 40; ++j) {
    X(j, 0) = u(rng);
    X(j, 1) = u(rng);
    y(j, 0) = 0.0;
    for (std::size_t q = 0; q < idx.size(); ++q) y(j, 0) += c(q) * legendre(idx[q].a, X(j, 0)) * legendre(idx[q].b, X(j, 1));
  }
  const PceModel pce = fit_pce(X, y, beta);
  CHECK((pce.coefficients.row(0).transpose() - c).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(pce.train_rms(0) <= 1e-12);
  CHECK(pce.condition_number >= 1.0);
}

TEST_CASE("PCE with beta 0 is the sample mean") {
  Eigen::MatrixXd X(5, 2), y(5, 2);
  X << 0.1, 0.2, -0.5, 0.3, 0.9, -0.9, 0.0, 0.0, 0.4, 0.4;
  y << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  const PceModel pce = fit_pce(X, y, 0);
  CHECK(pce.coefficients(0, 0) == doctest::Approx(3.0));
  CHECK(pce.coefficients(1, 0) == doctest::Approx(30.0));
}

TEST_CASE("PCE matches the normal-equations solution") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int beta = 3;
  const auto idx = total_degree_indices(beta);
  const std::size_t l = idx.size();
  Eigen::MatrixXd X(20, 2), y(20, 1);
  std::vector<std::vector<double>> A(20, std::vector<double>(l));
  for (int j = 0; j < 20; ++j) {
    X(j, 0) = u(rng);
    X(j, 1) = u(rng);
    y(j, 0) = std::exp(X(j, 0)) * std::cos(2 * X(j, 1));
    for (std::size_t q = 0; q < l; ++q) A[j][q] = P(idx[q].a, X(j, 0)) * P(idx[q].b, X(j, 1));
  }
  std::vector<std::vector<double>> AtA(l, std::vector<double>(l, 0.0));
  std::vector<double> Aty(l, 0.0);
  for (std::size_t a = 0; a < l; ++a) {
    for (int j = 0; j < 20; ++j) Aty[a] += A[j][a] * y(j, 0);
    for (std::size_t b = 0; b < l; ++b)
      for (int j = 0; j < 20; ++j) AtA[a][b] += A[j][a] * A[j][b];
  }
  const auto c = gauss_solve(AtA, Aty);
  const PceModel pce = fit_pce(X, y, beta);
  for (std::size_t q = 0; q < l; ++q) CHECK(pce.coefficients(0, q) == doctest::Approx(c[q]).scale(1.0).epsilon(1e-8));
}

TEST_CASE("under-determined PCE names both counts") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(100, 2), y = Eigen::MatrixXd::Zero(100, 1);
  CHECK_THROWS_WITH_AS(fit_pce(X, y, 15), doctest::Contains("100 samples < 136 coefficients"), DomainError);
}

TEST_CASE("surrogate: in-sample consistency, n check, extrapolation flag") {
  const TrainingSet t = synthetic_set(60, 10, 4);
  SurrogateOptions opt;
  opt.beta = 4;
  opt.p = 3;
  const Surrogate s = train_surrogate(t, opt);
  CHECK(s.nx == 10);
  CHECK(s.train_max_error > 0.0);
  for (std::size_t j = 0; j < t.size(); ++j) {
    const HeightProfile h = s.evaluate(t.inputs[j]);
    CHECK(h.provenance == Provenance::surrogate);
    double ss = 0.0;
    for (std::size_t i = 0; i < 10; ++i) ss += (h.h[i] - t.outputs[j].h[i]) * (h.h[i] - t.outputs[j].h[i]);
    CHECK(std::sqrt(ss) <= s.train_max_error);
  }
  CHECK_THROWS_AS(s.evaluate({10.0, 10.0, 0.8}), DomainError);
  bool extra = false;
  s.evaluate({260.0, 10.0, 1.0}, &extra);
  CHECK(extra);
  s.evaluate({10.0, 10.0, 1.0}, &extra);
  CHECK_FALSE(extra);
}

TEST_CASE("surrogate: full-rank PCA round-trip and PCA/no-PCA equivalence") {
  const TrainingSet t = synthetic_set(80, 8, 5);
  SurrogateOptions a;
  a.beta = 6;
  a.p = 7;
  SurrogateOptions b = a;
  b.use_pca = false;
  const Surrogate with = train_surrogate(t, a), without = train_surrogate(t, b);
  // Least squares commutes with the orthogonal change of basis.
  for (double B : {3.0, 100.0, 240.0}) {
    for (double S : {0.1, 60.0, 110.0}) {
      const auto x = with.evaluate({B, S, 1.0}).h, y = without.evaluate({B, S, 1.0}).h;
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("surrogate serialization is bit exact") {
  const TrainingSet t = synthetic_set(50, 9, 6);
  SurrogateOptions opt;
  opt.beta = 5;
  opt.p = 4;
  opt.domain = ParamDomain{0.5, 250.0, 0.05, 120.0, 125.25, 125.25, 60.025, 60.025};
  const Surrogate s = train_surrogate(t, opt);
  const std::string text = surrogate_to_json(s);
  const Surrogate r = surrogate_from_json(text);
  CHECK(surrogate_to_json(r) == text);
  CHECK(r.domain.B_divisor == 125.25);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uB(0.5, 250.0), uS(0.05, 120.0);
  for (int k = 0; k < 50; ++k) {
    const RheoParams p{uB(rng), uS(rng), 1.0};
    CHECK(s.evaluate(p).h == r.evaluate(p).h);
  }
  CHECK(r.training.grid.seed == 6);
  CHECK_THROWS_AS(surrogate_from_json("{}"), FormatError);
  CHECK_THROWS_AS(surrogate_from_json("not json"), FormatError);
}

TEST_CASE("validate reports Euclidean errors") {
  const TrainingSet t = synthetic_set(60, 10, 7);
  const TrainingSet v = synthetic_set(30, 10, 8);
  SurrogateOptions opt;
  opt.beta = 5;
  opt.p = 4;
  const Surrogate s = train_surrogate(t, opt);
  const ValidationReport rep = validate(s, v);
  REQUIRE(rep.errors.size() == 30);
  for (std::size_t j = 0; j < 30; ++j) {
    const auto h = s.evaluate(v.inputs[j]).h;
    double ss = 0.0;
    for (std::size_t i = 0; i < 10; ++i) ss += (h[i] - v.outputs[j].h[i]) * (h[i] - v.outputs[j].h[i]);
    CHECK(rep.errors[j] == doctest::Approx(std::sqrt(ss)).epsilon(1e-14));
  }
  CHECK(rep.stats.median == doctest::Approx(quantile(rep.errors, 0.5)));
  // Validation on the training set sits near the fit residual.
  CHECK(validate(s, t).stats.max == doctest::Approx(s.train_max_error));
}
