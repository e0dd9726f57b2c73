#pragma once

// Integer-order Bessel functions of the first kind, J_n(x), computed by
// Miller's downward recurrence normalized with J_0 + 2*sum J_{2k} = 1, with a
// power series for small arguments. Accuracy is checked in the test suite
// against std::cyl_bessel_j to 1e-12 and against the column-norm identity
// sum_n J_n(x)^2 = 1.

#include <cmath>
#include <cstdlib>
#include <vector>

namespace qelm {

namespace detail {

// Leading terms of J_n(x) = (x/2)^n / n! * sum_k (-x^2/4)^k / (k! (n+k)!).
inline double bessel_series(int n, double x) {
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= (x / 2.0) / k;
  double sum = term;
  const double q = -x * x / 4.0;
  for (int k = 1; k <= 24; ++k) {
    term *= q / (k * (n + k));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace detail

inline double bessel_j(int n, double x) {
  if (x < 0.0) return ((n & 1) ? -1.0 : 1.0) * bessel_j(n, -x);
  if (n < 0) return ((n & 1) ? -1.0 : 1.0) * bessel_j(-n, x);
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  if (x < 0.5 || (x < 2.0 && n > 4)) return detail::bessel_series(n, x);

  // Miller's algorithm: recurse J_{k-1} = (2k/x) J_k - J_{k+1} downward from
  // a start order comfortably above both n and x, rescaling on the fly to
  // avoid overflow, and normalize at the end.
  const int base = std::max(n, static_cast<int>(x) + 1);
  int start = base + 24 + 2 * static_cast<int>(std::sqrt(40.0 * base));
  if (start & 1) ++start;

  double jp = 0.0;   // J_{k+1}
  double jc = 1e-30; // J_k (arbitrary scale)
  double norm = 0.0; // accumulates J_0 + 2*sum_{even k>0} J_k at current scale
  double target = 0.0;
  for (int k = start; k >= 1; --k) {
    const double jm = (2.0 * k / x) * jc - jp;
    jp = jc;
    jc = jm;
    if (k - 1 == n) target = jc;
    if (((k - 1) & 1) == 0) norm += (k - 1 == 0) ? jc : 2.0 * jc;
    if (std::abs(jc) > 1e250) {
      jc *= 1e-250;
      jp *= 1e-250;
      norm *= 1e-250;
      target *= 1e-250;
    }
  }
  return target / norm;
}

}  // namespace qelm
