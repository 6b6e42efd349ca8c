#ifndef HPSPIN_GAUSSIAN_MOMENTS_HPP
#define HPSPIN_GAUSSIAN_MOMENTS_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>

#include "hpspin/common.hpp"

namespace hpspin {

/// log E|X|^k for X ~ N(0,1): (k/2) ln 2 + lnGamma((k+1)/2) - (1/2) ln pi.
/// Defined for real k > -1; integer and half-integer k both appear in the series.
inline double log_abs_moment(double k) {
  return 0.5 * k * std::numbers::ln2 + std::lgamma(0.5 * (k + 1.0)) -
         0.5 * std::log(std::numbers::pi);
}

/// A moment kept in log domain. `parity_zero` marks signed moments that vanish
/// exactly because some exponent is odd; log_value is then meaningless (-inf).
struct LogMoment {
  double log_value = 0.0;
  bool parity_zero = false;

  double value() const { return parity_zero ? 0.0 : std::exp(log_value); }
};

/// E[sigma_1^{i_1} ... sigma_k^{i_k}] (or with absolute values) for sigma uniform
/// on the sphere sum sigma_i^2 = n:
///
///   n^{S/2} E|X|^{n-1} prod_t E[X^{i_t}] / E|X|^{S+n-1},   S = sum_t i_t.
inline LogMoment sphere_moment(std::size_t n, std::span<const unsigned> exponents, bool absolute) {
  if (exponents.size() > n) throw std::invalid_argument("sphere_moment: more exponents than coordinates");
  double total = 0.0;
  double log_prod = 0.0;
  for (unsigned e : exponents) {
    if (!absolute && (e % 2u) != 0u) return {kNegInf, true};
    total += e;
    log_prod += log_abs_moment(e);
  }
  const double dn = static_cast<double>(n);
  const double lv = 0.5 * total * std::log(dn) + log_abs_moment(dn - 1.0) + log_prod -
                    log_abs_moment(total + dn - 1.0);
  return {lv, false};
}

}  // namespace hpspin

#endif
