#pragma once

#include <cmath>
#include <functional>

#include "gyrolimit/core.hpp"

namespace gyrolimit {

namespace detail {

template <class G>
double simpson_recurse(G& g, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = g(lm), frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_recurse(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction. The interval is
/// first cut into `pieces` equal panels so that oscillatory integrands are
/// not accepted on a lucky coarse sample.
template <class G>
double adaptive_simpson(G&& g, double a, double b, double tol, int pieces = 8,
                        int max_depth = 40) {
  require(tol > 0.0, "quadrature::adaptive_simpson", "tolerance must be positive");
  require(pieces >= 1, "quadrature::adaptive_simpson", "need at least one panel");
  if (a == b) return 0.0;
  double total = 0.0;
  const double w = (b - a) / pieces;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * w;
    const double hi = (i + 1 == pieces) ? b : a + (i + 1) * w;
    const double flo = g(lo), fhi = g(hi), fm = g(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += detail::simpson_recurse(g, lo, hi, flo, fm, fhi, whole, tol / pieces, max_depth);
  }
  return total;
}

/// Composite Simpson rule with n (rounded up to even) panels.
template <class G>
double composite_simpson(G&& g, double a, double b, int n) {
  require(n >= 2, "quadrature::composite_simpson", "need at least two panels");
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double acc = g(a) + g(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return acc * h / 3.0;
}

}  // namespace gyrolimit
