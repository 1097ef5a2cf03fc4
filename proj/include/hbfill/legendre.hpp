#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hbfill {

/// Legendre polynomial P_k(x) by the three-term recurrence.
double legendre(int k, double x);

/// Writes P_0(x), ..., P_kmax(x) into out (size kmax + 1).
void legendre_all(int kmax, double x, std::span<double> out);

/// Degrees (a, b) of the tensor-product basis function P_a(Bt) P_b(St).
struct MultiIndex {
  int a = 0;
  int b = 0;
  int degree() const { return a + b; }
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// Number of bivariate multi-indices of total degree <= beta.
constexpr std::size_t basis_size(int beta) {
  return static_cast<std::size_t>(beta + 1) * static_cast<std::size_t>(beta + 2) / 2;
}

/// All (a, b) with a + b <= beta, graded: by total degree, then by a.
std::vector<MultiIndex> total_degree_indices(int beta);

/// psi_j(Bt, St) = P_{a_j}(Bt) P_{b_j}(St) for each index, in order.
/// Returns true when (Bt, St) lies outside [-1, 1]^2.
bool basis_eval(std::span<const MultiIndex> indices, double Bt, double St, std::span<double> out);
std::vector<double> basis_eval(std::span<const MultiIndex> indices, double Bt, double St);

}  // namespace hbfill
