#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "hbfill/legendre.hpp"
#include "hbfill/stats.hpp"

using namespace hbfill;

namespace {

// 5-point Gauss-Legendre rule, exact for polynomials of degree <= 9.
constexpr double kX5[] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
constexpr double kW5[] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                          0.2369268850561891};

// n-point rule by Golub-Welsch: nodes are the eigenvalues of the Jacobi
// matrix of the Legendre recurrence, weights come from the first components
// of the eigenvectors.
void gauss_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()(i);
    w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

}  // namespace

TEST_CASE("legendre base cases and endpoint") {
  for (double x : {-1.0, -0.3, 0.0, 0.7, 1.0}) CHECK(legendre(0, x) == 1.0);
  CHECK(legendre(1, 0.3) == 0.3);
  CHECK(legendre(2, 1.0) == 1.0);
  for (int k = 0; k <= 30; ++k) {
    CHECK(legendre(k, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(legendre(k, -1.0) == doctest::Approx(k % 2 ? -1.0 : 1.0).epsilon(1e-14));
  }
  CHECK(legendre(3, 0.4) == doctest::Approx(0.5 * (5 * 0.064 - 3 * 0.4)).epsilon(1e-15));
  std::vector<double> all(31);
  legendre_all(30, 0.37, all);
  for (int k = 0; k <= 30; ++k) CHECK(all[k] == legendre(k, 0.37));
}

TEST_CASE("legendre orthogonality by quadrature") {
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += 0.5 * kW5[i] * legendre(3, kX5[i]) * legendre(5, kX5[i]);
  CHECK(std::abs(s) <= 1e-10);

  std::vector<double> x, w;
  gauss_rule(24, x, w);
  for (int a = 0; a <= 20; ++a) {
    for (int b = 0; b <= 20; ++b) {
      double v = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) v += 0.5 * w[i] * legendre(a, x[i]) * legendre(b, x[i]);
      const double expect = a == b ? 1.0 / (2 * a + 1) : 0.0;
      CHECK(v == doctest::Approx(expect).scale(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("multi-index ordering and basis evaluation") {
  const auto idx = total_degree_indices(3);
  REQUIRE(idx.size() == basis_size(3));
  CHECK(basis_size(15) == 136);
  const std::vector<MultiIndex> expect{{0, 0}, {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0},
                                       {0, 3}, {1, 2}, {2, 1}, {3, 0}};
  CHECK(idx == expect);

  const std::vector<MultiIndex> one{{0, 0}, {1, 0}};
  auto v = basis_eval(one, 0.5, -0.9);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.5);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<MultiIndex> i23{{2, 3}};
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng);
    CHECK(basis_eval(i23, a, b)[0] == doctest::Approx(legendre(2, a) * legendre(3, b)).epsilon(1e-15));
  }
  std::vector<double> out(1);
  CHECK_FALSE(basis_eval(i23, 1.0, -1.0, out));
  CHECK(basis_eval(i23, 1.01, 0.0, out));
}

TEST_CASE("quantiles and summary") {
  const std::vector<double> v{5.0, 1.0, 4.0, 2.0, 3.0};
  CHECK(quantile(v, 0.5) == 3.0);
  CHECK(quantile(v, 0.75) == 4.0);
  CHECK(quantile(v, 1.0) == 5.0);
  CHECK(quantile(v, 0.0) == 1.0);
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  CHECK(quantile(w, 0.5) == 2.5);
  CHECK(quantile(w, 0.75) == doctest::Approx(3.25));
  const ErrorStats s = summarize(v);
  CHECK(s.count == 5);
  CHECK(s.median == 3.0);
  CHECK(s.max == 5.0);
  CHECK(s.mean == 3.0);
  CHECK(s.variance == doctest::Approx(2.0));
  CHECK(summarize(std::vector<double>{}).count == 0);
}
