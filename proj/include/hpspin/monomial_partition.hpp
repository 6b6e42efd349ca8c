#ifndef HPSPIN_MONOMIAL_PARTITION_HPP
#define HPSPIN_MONOMIAL_PARTITION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpspin/common.hpp"
#include "hpspin/gaussian_moments.hpp"
#include "hpspin/phase_functions.hpp"

namespace hpspin {

enum class Parity { Even, Odd };

/// log of (|H| n)^k / k! * (E|X|^k)^p * E|X|^{n-1} / E|X|^{kp+n-1}, i.e. the
/// k-th Taylor term of E exp(H sigma_1...sigma_p n^{-(p-2)/2}) with absolute
/// moments. For even k this is the signed term.
inline double log_term_k(std::size_t n, int p, double h, double k) {
  if (k == 0.0) return 0.0;
  const double ah = std::abs(h);
  if (ah == 0.0) return kNegInf;
  const double dn = static_cast<double>(n);
  return k * std::log(ah * dn) - std::lgamma(k + 1.0) + p * log_abs_moment(k) +
         log_abs_moment(dn - 1.0) - log_abs_moment(k * p + dn - 1.0);
}

/// Term of index ell: exponent 2 ell (Even) or 2 ell + 1 (Odd).
inline double log_term(std::size_t n, int p, double h, std::size_t ell, Parity parity) {
  const double k = 2.0 * static_cast<double>(ell) + (parity == Parity::Odd ? 1.0 : 0.0);
  return log_term_k(n, p, h, k);
}

struct SeriesProfile {
  std::size_t n = 0;
  int p = 2;
  double h = 0.0;
  Parity parity = Parity::Even;
  std::vector<double> terms;  // terms[ell] = log-term
  std::size_t argmax_ell = 0;
  double log_sum = 0.0;
  double truncation_bound = kNegInf;  // log upper bound of the discarded tail
};

/// Sums the series in ascending ell with a streaming log-sum-exp. Stops once the
/// terms are past both the running peak and the convex-to-concave transition
/// near ell = (p-2) n / (4p), the consecutive ratio r is below 0.99, and the
/// geometric tail bound term * r / (1 - r) is below rel_tol of the running sum.
inline SeriesProfile log_partition_series(std::size_t n, int p, double h,
                                          Parity parity = Parity::Even, double rel_tol = 1e-6) {
  check_order(p);
  if (n < static_cast<std::size_t>(p)) throw std::invalid_argument("log_partition_series requires n >= p");
  SeriesProfile prof;
  prof.n = n;
  prof.p = p;
  prof.h = h;
  prof.parity = parity;
  if (h == 0.0) {
    if (parity == Parity::Even) {
      prof.terms = {0.0};
      prof.log_sum = 0.0;
    } else {
      prof.terms = {kNegInf};
      prof.log_sum = kNegInf;
    }
    return prof;
  }
  const double dn = static_cast<double>(n);
  double lam_guess = 1.0;
  if (std::abs(h) > h_min(p) * (1.0 + 1e-9)) lam_guess = std::max(1.0, lambda_p(p, h));
  const auto cap = static_cast<std::size_t>(10.0 * std::max(dn, std::ceil(lam_guess * dn)));
  const auto concave_from = static_cast<std::size_t>(std::ceil(1.1 * lambda_floor(p) * dn)) + 2;
  const double log_tol = std::log(rel_tol);

  LogSumAccumulator acc;
  double best = kNegInf;
  for (std::size_t ell = 0; ell <= cap; ++ell) {
    const double t = log_term(n, p, h, ell, parity);
    prof.terms.push_back(t);
    acc.add(t);
    if (t > best) {
      best = t;
      prof.argmax_ell = ell;
    }
    if (ell < 1 || ell < concave_from || ell <= prof.argmax_ell) continue;
    const double log_r = t - prof.terms[ell - 1];
    if (log_r >= std::log(0.99)) continue;
    const double bound = t + log_r - std::log1p(-std::exp(log_r));
    if (bound <= acc.value() + log_tol) {
      prof.truncation_bound = bound;
      prof.log_sum = acc.value();
      return prof;
    }
  }
  throw std::logic_error("log_partition_series: no truncation certificate within the ell cap");
}

struct WindowReport {
  bool below = false;
  double argmax_fraction = 0.0;  // argmax_ell / n
  double lambda_pred = 0.0;
  double rel_gap = 0.0;  // |argmax/n - lambda| / lambda
  double window_mass = 0.0;  // fraction of the total sum with ell in lambda n (1 +- eps)
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline WindowReport concentration_window(const SeriesProfile& prof, double eps = 0.1) {
  WindowReport w;
  if (prof.argmax_ell <= 1) {
    w.below = true;
    return w;
  }
  const double dn = static_cast<double>(prof.n);
  w.argmax_fraction = static_cast<double>(prof.argmax_ell) / dn;
  w.lambda_pred = lambda_p(prof.p, prof.h);
  w.rel_gap = std::abs(w.argmax_fraction - w.lambda_pred) / w.lambda_pred;
  w.lo = static_cast<std::size_t>(std::ceil(w.lambda_pred * dn * (1.0 - eps)));
  w.hi = static_cast<std::size_t>(std::floor(w.lambda_pred * dn * (1.0 + eps)));
  LogSumAccumulator inside;
  for (std::size_t ell = w.lo; ell <= w.hi && ell < prof.terms.size(); ++ell) inside.add(prof.terms[ell]);
  w.window_mass = inside.empty() ? 0.0 : std::exp(inside.value() - prof.log_sum);
  return w;
}

/// (windowed odd-power sum) / (windowed even-power sum), window lambda n (1 +- eps).
inline double odd_even_ratio(std::size_t n, int p, double h, double eps = 0.1) {
  const double hs = h_star(p);
  if (!(std::abs(h) > hs)) throw DomainError("odd_even_ratio requires |H| > H_p^*", hs);
  const double lam = lambda_p(p, h);
  const double dn = static_cast<double>(n);
  const auto lo = static_cast<std::size_t>(std::ceil(lam * dn * (1.0 - eps)));
  const auto hi = static_cast<std::size_t>(std::floor(lam * dn * (1.0 + eps)));
  LogSumAccumulator even, odd;
  for (std::size_t ell = lo; ell <= hi; ++ell) {
    even.add(log_term(n, p, h, ell, Parity::Even));
    odd.add(log_term(n, p, h, ell, Parity::Odd));
  }
  return std::exp(odd.value() - even.value());
}

enum class Phase { Below, Above, Critical };

inline const char* to_string(Phase ph) {
  switch (ph) {
    case Phase::Below: return "Below";
    case Phase::Above: return "Above";
    case Phase::Critical: return "Critical";
  }
  return "?";
}

struct PhaseClassification {
  Phase phase = Phase::Below;
  bool cross_check_ran = false;
  bool cross_check_agrees = true;
};

inline constexpr std::size_t kDefaultProbeN = 2000;

/// Compares |H| against H_p^* with the critical band, and checks the verdict
/// against the series profile at n_probe (Below <=> peak at ell <= 1).
inline PhaseClassification classify_phase(int p, double h, std::size_t n_probe = kDefaultProbeN) {
  const double hs = h_star(p);
  PhaseClassification c;
  const double ah = std::abs(h);
  if (std::abs(ah - hs) <= kCriticalBand) {
    c.phase = Phase::Critical;
    return c;
  }
  c.phase = ah < hs ? Phase::Below : Phase::Above;
  if (n_probe >= static_cast<std::size_t>(p)) {
    const auto w = concentration_window(log_partition_series(n_probe, p, h));
    c.cross_check_ran = true;
    c.cross_check_agrees = w.below == (c.phase == Phase::Below);
  }
  return c;
}

}  // namespace hpspin

#endif
