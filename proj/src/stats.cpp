#include "hbfill/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hbfill/error.hpp"

namespace hbfill {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

ErrorStats summarize(std::span<const double> values) {
  ErrorStats s;
  s.count = values.size();
  if (values.empty()) return s;
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.variance = ss / static_cast<double>(values.size());
  return s;
}

}  // namespace hbfill
