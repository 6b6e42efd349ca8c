#ifndef HPSPIN_PHASE_FUNCTIONS_HPP
#define HPSPIN_PHASE_FUNCTIONS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hpspin/common.hpp"
#include "hpspin/roots.hpp"

namespace hpspin {

// Phase objects of a single p-spin monomial H sigma_1...sigma_p n^{-(p-2)/2}.
// Everything depends on |H| only.

/// Inputs within this distance of H_p^* are treated as critical.
inline constexpr double kCriticalBand = 1e-6;

inline void check_order(int p) {
  if (p < 2) throw DomainError("interaction order must be >= 2");
}

/// Location where d/dc of the free-energy exponent is maximal; lambda_p lies to its right.
inline double lambda_floor(int p) { return static_cast<double>(p - 2) / (4.0 * p); }

/// Smallest |H| for which lambda_p is defined: p^{p-1} / (2 (p-2)^{(p-2)/2}); 1 for p = 2.
inline double h_min(int p) {
  check_order(p);
  if (p == 2) return 1.0;
  const double dp = p;
  return std::exp((dp - 1.0) * std::log(dp) - std::log(2.0) - 0.5 * (dp - 2.0) * std::log(dp - 2.0));
}

/// g(p,c,H) = 2c log H - 2c log 2c + 2c + pc log 2c - (2pc+1)/2 log(2pc+1), with g(0+) = 0.
inline double g_value(int p, double c, double h) {
  check_order(p);
  if (!(c >= 0.0) || !(h > 0.0)) throw DomainError("g_value requires c >= 0 and H > 0");
  if (c == 0.0) return 0.0;
  const double x = 2.0 * c;
  const double y = 2.0 * p * c;
  // (p-2) c log(2c) written via x to keep the c -> 0 limit clean.
  return x * std::log(h) + 0.5 * (p - 2) * x * std::log(x) + x - 0.5 * (y + 1.0) * std::log1p(y);
}

/// 2 log H + (p-2) log(2c) - p log(2pc+1); its larger zero is lambda_p(H).
inline double lambda_equation(int p, double c, double h) {
  return 2.0 * std::log(h) + (p - 2) * std::log(2.0 * c) - p * std::log1p(2.0 * p * c);
}

struct LambdaSolution {
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Larger root of the lambda equation, with its residual. p = 2 uses (|H|-1)/4.
inline LambdaSolution lambda_p_certified(int p, double h) {
  check_order(p);
  const double ah = std::abs(h);
  if (p == 2) {
    if (!(ah > 1.0)) throw DomainError("lambda_2 requires |H| > 1", 1.0);
    const double lam = (ah - 1.0) / 4.0;
    return {lam, lambda_equation(2, lam, ah), 0};
  }
  const double floor_h = h_min(p);
  if (!(ah > floor_h)) throw DomainError("lambda_p undefined for |H| <= h_min(p)", floor_h);
  auto eq = [&](double c) { return lambda_equation(p, c, ah); };
  const double lo = lambda_floor(p) * (1.0 + 1e-12);
  if (eq(lo) <= 0.0) throw DomainError("lambda_p: |H| too close to h_min(p) to bracket", floor_h);
  const double hi = expand_until([&](double c) { return eq(c) < 0.0; }, 2.0 * lambda_floor(p));
  const auto cert = bisect(eq, lo, hi);
  return {cert.root, cert.residual, cert.iterations};
}

inline double lambda_p(int p, double h) { return lambda_p_certified(p, h).lambda; }

/// Threshold H_p^*: root of H -> g(p, lambda_p(H), H). H_2^* = 1.
inline double h_star(int p) {
  check_order(p);
  if (p == 2) return 1.0;
  auto gap = [&](double h) { return g_value(p, lambda_p(p, h), h); };
  const double lo = h_min(p) * (1.0 + 1e-9);
  const double hi = expand_until([&](double h) { return gap(h) > 0.0; }, 1.5 * h_min(p), 1.5);
  return bisect(gap, lo, hi).root;
}

/// f_p evaluated through both closed forms; `consistent` when they agree to 1e-9.
struct FreeEnergyValue {
  double value = 0.0;
  double g_form = 0.0;
  double lambda_form = 0.0;
  bool above = false;
  bool consistent = true;
};

inline FreeEnergyValue f_p_certified(int p, double h, double threshold) {
  const double ah = std::abs(h);
  FreeEnergyValue out;
  if (!(ah > threshold) || !(ah > h_min(p))) return out;
  const double lam = lambda_p(p, ah);
  out.above = true;
  out.g_form = g_value(p, lam, ah);
  out.lambda_form = 2.0 * lam - 0.5 * std::log1p(2.0 * p * lam);
  out.consistent = std::abs(out.g_form - out.lambda_form) < 1e-9;
  out.value = std::max({0.0, out.g_form, out.lambda_form});
  return out;
}

/// Immutable per-order table of the phase constants.
struct PhaseTable {
  int p = 2;
  double h_star = 1.0;
  double lambda_floor = 0.0;
  double h_min = 1.0;

  static PhaseTable build(int order) {
    check_order(order);
    return {order, hpspin::h_star(order), hpspin::lambda_floor(order), hpspin::h_min(order)};
  }

  double f(double h) const { return f_p_certified(p, h, h_star).value; }
  bool critical(double h) const { return std::abs(std::abs(h) - h_star) <= kCriticalBand; }
};

inline double f_p(int p, double h) { return f_p_certified(p, h, h_star(p)).value; }

/// Limiting sigma_i^2 / n on a dominant p-spin term: 2 lambda / (2 p lambda + 1).
inline double t_magnitude(int p, double h_eff) {
  const double hs = h_star(p);
  if (!(std::abs(h_eff) > hs)) throw DomainError("t_magnitude requires |h_eff| > H_p^*", hs);
  const double lam = lambda_p(p, h_eff);
  return 2.0 * lam / (2.0 * p * lam + 1.0);
}

}  // namespace hpspin

#endif
