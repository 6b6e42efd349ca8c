#ifndef HPSPIN_HEAVYTAIL_LAW_HPP
#define HPSPIN_HEAVYTAIL_LAW_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpspin/common.hpp"
#include "hpspin/rng.hpp"
#include "hpspin/roots.hpp"

namespace hpspin {

enum class SlowlyVarying { Constant, PolyLog };

/// Law of |H| with P(|H| > t) = L(t) t^{-alpha} for t above a support floor.
///
/// For PolyLog, L(t) = (log t)^gamma. The raw expression is not monotone on all
/// of (e, inf) when gamma/alpha > 1, so tail probabilities use the least
/// nonincreasing majorant of L(t) t^{-alpha} on t > t_floor. When the raw tail
/// crosses 1 above e the floor is the larger crossing and the law is continuous
/// there; otherwise the floor is e and |H| carries an atom at e.
class TailLaw {
 public:
  static TailLaw constant(double alpha) {
    check_alpha(alpha);
    return TailLaw(SlowlyVarying::Constant, alpha, 0.0, 1.0, 0.0);
  }

  static TailLaw polylog(double alpha, double gamma) {
    check_alpha(alpha);
    const double log_peak_t = std::max(1.0, gamma / alpha);
    auto log_raw = [&](double log_t) { return gamma * std::log(log_t) - alpha * log_t; };
    double t_floor = std::numbers::e;
    if (log_raw(log_peak_t) > 0.0) {
      const double hi = expand_until([&](double u) { return log_raw(u) < 0.0; }, 2.0 * log_peak_t);
      const auto cert = bisect(log_raw, log_peak_t, hi);
      t_floor = std::exp(cert.hi);
    }
    return TailLaw(SlowlyVarying::PolyLog, alpha, gamma, t_floor, log_peak_t);
  }

  SlowlyVarying family() const { return family_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  double t_floor() const { return t_floor_; }

  /// log P(|H| > t) for t > t_floor (no clamping at 0).
  double log_tail_above_floor(double t) const {
    if (family_ == SlowlyVarying::Constant) return std::min(0.0, -alpha_ * std::log(t));
    const double u = std::max(std::log(t), log_peak_t_);
    return std::min(0.0, gamma_ * std::log(u) - alpha_ * u);
  }

  /// log of P(|H| > t) just above the floor; below 0 only when |H| has an atom there.
  double log_tail_at_floor_plus() const { return log_tail_above_floor(t_floor_); }

 private:
  TailLaw(SlowlyVarying f, double a, double g, double floor, double log_peak)
      : family_(f), alpha_(a), gamma_(g), t_floor_(floor), log_peak_t_(log_peak) {}

  static void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("tail exponent out of (0,2)");
  }

  SlowlyVarying family_;
  double alpha_;
  double gamma_;
  double t_floor_;
  double log_peak_t_;
};

/// P(|H| > t). Exactly 1 at t_floor.
inline double tail_prob(const TailLaw& law, double t) {
  if (t < law.t_floor()) throw DomainError("tail_prob: t below support floor", law.t_floor());
  if (t == law.t_floor()) return 1.0;
  return std::clamp(std::exp(law.log_tail_above_floor(t)), 0.0, 1.0);
}

/// log of the normalization quantile b_{n,p} = inf{t : P(|H| > t) < C(n,p)^{-1}}.
inline double log_quantile_b(const TailLaw& law, std::size_t n, std::size_t p) {
  if (p < 2 || p > n) throw DomainError("quantile_b requires 2 <= p <= n");
  const unsigned long long exact = binomial_u64(n, p);
  const double log_c = exact != 0 ? std::log(static_cast<double>(exact)) : log_binomial(n, p);
  const double log_floor = std::log(law.t_floor());
  if (log_c <= 0.0) return log_floor;
  if (law.family() == SlowlyVarying::Constant) return log_c / law.alpha();
  // excess(u) = log tail(e^u) + log C; decreasing in u, the infimum is its root.
  auto excess = [&](double u) { return law.log_tail_above_floor(std::exp(u)) + log_c; };
  if (excess(log_floor) < 0.0) return log_floor;
  double hi = log_floor + 1.0;
  while (excess(hi) >= 0.0) hi = log_floor + 2.0 * (hi - log_floor);
  double lo = log_floor;
  while (hi - lo > 1e-14 * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (excess(mid) >= 0.0 ? lo : hi) = mid;
  }
  return hi;
}

inline double quantile_b(const TailLaw& law, std::size_t n, std::size_t p) {
  const double lb = log_quantile_b(law, n, p);
  if (lb > std::log(std::numeric_limits<double>::max())) {
    throw std::overflow_error("quantile_b: b_{n,p} not representable; use log_quantile_b");
  }
  return std::exp(lb);
}

/// log of the smallest t >= t_floor with P(|H| > t) <= u, taking log u (< 0).
inline double log_inverse_tail(const TailLaw& law, double log_u) {
  if (law.family() == SlowlyVarying::Constant) return -log_u / law.alpha();
  const double log_floor = std::log(law.t_floor());
  auto excess = [&](double v) { return law.log_tail_above_floor(std::exp(v)) - log_u; };
  if (excess(log_floor) <= 0.0) return log_floor;
  double hi = log_floor + 1.0;
  while (excess(hi) > 0.0) hi = log_floor + 2.0 * (hi - log_floor);
  double lo = log_floor;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

/// Smallest t >= t_floor with P(|H| > t) <= u, for u in (0,1).
inline double inverse_tail(const TailLaw& law, double u) {
  if (law.family() == SlowlyVarying::Constant) return std::pow(u, -1.0 / law.alpha());
  return std::exp(log_inverse_tail(law, std::log(u)));
}

/// E[|H|^2 ; |H| <= h] for h >= t_floor, by Simpson's rule in log t above the floor.
inline double truncated_second_moment(const TailLaw& law, double h, int intervals = 4000) {
  const double floor_t = law.t_floor();
  if (h <= floor_t) return 0.0;
  const double tail_h = tail_prob(law, h);
  double total = floor_t * floor_t * (1.0 - tail_h);
  const double a = std::log(floor_t), b = std::log(h);
  const double step = (b - a) / intervals;
  auto integrand = [&](double u) {
    const double t = std::exp(u);
    const double tail_t = u <= a ? std::exp(law.log_tail_at_floor_plus()) : tail_prob(law, t);
    return 2.0 * t * t * (tail_t - tail_h);
  };
  double s = integrand(a) + integrand(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * integrand(a + i * step);
  total += s * step / 3.0;
  return total;
}

/// Draw `count` i.i.d. signed couplings: inverse-tail magnitude, fair sign.
inline std::vector<double> sample(const TailLaw& law, Stream& stream, std::size_t count) {
  if (count == 0) throw std::invalid_argument("sample: count must be >= 1");
  std::vector<double> out(count);
  for (auto& v : out) {
    const double mag = inverse_tail(law, stream.uniform_open());
    v = stream.coin() ? mag : -mag;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extreme-value utilities

inline double frechet_cdf(double x, double alpha) {
  return x <= 0.0 ? 0.0 : std::exp(-std::pow(x, -alpha));
}

inline double frechet_draw(Stream& stream, double alpha) {
  return std::pow(-std::log(stream.uniform_open()), -1.0 / alpha);
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of `values`
/// and a continuous reference CDF.
inline double ks_statistic(std::vector<double> values, const std::function<double(double)>& cdf) {
  if (values.empty()) throw std::invalid_argument("ks_statistic: empty input");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// KS distance of rescaled maxima against Frechet(alpha): F(x) = exp(-x^{-alpha}).
inline double frechet_gof(std::span<const double> rescaled_maxima, double alpha) {
  return ks_statistic({rescaled_maxima.begin(), rescaled_maxima.end()},
                      [alpha](double x) { return frechet_cdf(x, alpha); });
}

/// Descending |H| order statistics with the signs of the original draws.
struct OrderedSample {
  std::vector<double> values;
  std::vector<int> raw_signs;

  static OrderedSample from_signed(std::span<const double> draws) {
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end(),
              [](double a, double b) { return std::abs(a) > std::abs(b); });
    OrderedSample s;
    s.values.reserve(sorted.size());
    s.raw_signs.reserve(sorted.size());
    for (double v : sorted) {
      s.values.push_back(std::abs(v));
      s.raw_signs.push_back(v < 0.0 ? -1 : 1);
    }
    return s;
  }
};

struct EnvelopeReport {
  std::size_t violations = 0;
  std::size_t first_violation = 0;  // 1-based rank; 0 when none
};

/// Counts ranks i >= i_min (1-based) with values[i] >= n^{eps0} i^{-1/alpha}.
inline EnvelopeReport order_stat_envelope(const OrderedSample& sample, double eps0, double alpha,
                                          std::size_t i_min, std::size_t n) {
  if (!(eps0 > 0.0) || i_min < 1) throw std::invalid_argument("order_stat_envelope: bad arguments");
  const double scale = std::pow(static_cast<double>(n), eps0);
  EnvelopeReport r;
  for (std::size_t i = i_min; i <= sample.values.size(); ++i) {
    const double bound = scale * std::pow(static_cast<double>(i), -1.0 / alpha);
    if (sample.values[i - 1] >= bound) {
      if (r.violations == 0) r.first_violation = i;
      ++r.violations;
    }
  }
  return r;
}

}  // namespace hpspin

#endif
