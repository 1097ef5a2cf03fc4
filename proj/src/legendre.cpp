#include "hbfill/legendre.hpp"

#include <algorithm>
#include <cmath>

#include "hbfill/error.hpp"

namespace hbfill {

double legendre(int k, double x) {
  if (k < 0) throw DomainError("legendre: negative degree");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = ((2.0 * j + 1.0) * x * cur - j * prev) / (j + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

void legendre_all(int kmax, double x, std::span<double> out) {
  if (kmax < 0 || out.size() < static_cast<std::size_t>(kmax) + 1) {
    throw DomainError("legendre_all: output too short");
  }
  out[0] = 1.0;
  if (kmax == 0) return;
  out[1] = x;
  for (int j = 1; j < kmax; ++j) {
    out[j + 1] = ((2.0 * j + 1.0) * x * out[j] - j * out[j - 1]) / (j + 1.0);
  }
}

std::vector<MultiIndex> total_degree_indices(int beta) {
  if (beta < 0) throw DomainError("truncation order must be >= 0");
  std::vector<MultiIndex> idx;
  idx.reserve(basis_size(beta));
  for (int deg = 0; deg <= beta; ++deg) {
    for (int a = 0; a <= deg; ++a) {
      idx.push_back({a, deg - a});
    }
  }
  return idx;
}

bool basis_eval(std::span<const MultiIndex> indices, double Bt, double St, std::span<double> out) {
  if (out.size() != indices.size()) throw DomainError("basis_eval: output size mismatch");
  int kmax = 0;
  for (const auto& m : indices) kmax = std::max({kmax, m.a, m.b});
  // Degrees are small (<= ~30); stack buffers would do, but keep it simple.
  std::vector<double> pb(static_cast<std::size_t>(kmax) + 1), ps(static_cast<std::size_t>(kmax) + 1);
  legendre_all(kmax, Bt, pb);
  legendre_all(kmax, St, ps);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    out[j] = pb[static_cast<std::size_t>(indices[j].a)] * ps[static_cast<std::size_t>(indices[j].b)];
  }
  return std::abs(Bt) > 1.0 || std::abs(St) > 1.0;
}

std::vector<double> basis_eval(std::span<const MultiIndex> indices, double Bt, double St) {
  std::vector<double> out(indices.size());
  basis_eval(indices, Bt, St, out);
  return out;
}

}  // namespace hbfill
