#ifndef HPSPIN_ROOTS_HPP
#define HPSPIN_ROOTS_HPP

#include <cmath>
#include <stdexcept>

namespace hpspin {

/// Outcome of a bracketed root search. `residual` is f(root).
struct RootCertificate {
  double root = 0.0;
  double residual = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
};

/// Bisection on [lo, hi] where f(lo) and f(hi) have opposite signs (or one is 0).
/// Iterates until the bracket cannot shrink in floating point or `max_iter` is
/// reached; returns the endpoint with the smaller |f|.
template <class F>
RootCertificate bisect(F&& f, double lo, double hi, int max_iter = 400) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return {lo, 0.0, lo, lo, 0};
  if (fhi == 0.0) return {hi, 0.0, hi, hi, 0};
  if (std::signbit(flo) == std::signbit(fhi)) {
    throw std::invalid_argument("bisect: endpoints do not bracket a root");
  }
  int it = 0;
  for (; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return {mid, 0.0, mid, mid, it + 1};
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  if (std::abs(flo) <= std::abs(fhi)) return {lo, flo, lo, hi, it};
  return {hi, fhi, lo, hi, it};
}

/// Grow `hi` geometrically from `start` until pred(hi) holds.
template <class P>
double expand_until(P&& pred, double start, double factor = 2.0, int max_steps = 2000) {
  double hi = start;
  for (int i = 0; i < max_steps; ++i) {
    if (pred(hi)) return hi;
    hi *= factor;
  }
  throw std::runtime_error("expand_until: no bracket found");
}

}  // namespace hpspin

#endif
