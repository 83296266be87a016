#pragma once

#include <cmath>
#include <limits>

namespace futopic {

// Digamma for x > 0: upward recurrence to x >= 6, then the asymptotic
// Bernoulli series through x^-14. Absolute error stays below 1e-12 on [1e-6, inf).
inline double digamma(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  // Recurrence terms are summed smallest-first so the dominant 1/x for tiny x
  // is subtracted last.
  double shifts[6];
  int nshift = 0;
  while (x < 6.0) {
    shifts[nshift++] = 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // B2n / (2n) for n = 1..7
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  double result = std::log(x) - 0.5 * inv - series;
  while (nshift > 0) result -= shifts[--nshift];
  return result;
}

}  // namespace futopic
