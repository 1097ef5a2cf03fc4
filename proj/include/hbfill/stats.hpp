#pragma once

#include <span>

namespace hbfill {

/// Summary used for reconstruction and estimation error tables.
struct ErrorStats {
  std::size_t count = 0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double variance = 0.0;  ///< population variance
};

/// Quantile with linear interpolation between order statistics
/// (position q * (n - 1) in the sorted sample).
double quantile(std::span<const double> values, double q);

ErrorStats summarize(std::span<const double> values);

}  // namespace hbfill
