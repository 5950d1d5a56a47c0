#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace ccdae::detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log(0.5 e^a + 0.5 e^b); exact when a == b.
inline double log_mix_half(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log(0.5 + 0.5 * std::exp(lo - hi));
}

}  // namespace ccdae::detail
