#ifndef HPSPIN_NIM_MODEL_HPP
#define HPSPIN_NIM_MODEL_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hpspin/common.hpp"
#include "hpspin/gaussian_moments.hpp"
#include "hpspin/monomial_partition.hpp"
#include "hpspin/phase_functions.hpp"
#include "hpspin/sphere_point.hpp"

namespace hpspin {

struct NimTerm {
  double coef = 0.0;
  std::vector<std::size_t> indices;  // 0-based spin indices

  int order() const { return static_cast<int>(indices.size()); }
};

/// Hamiltonian sum_i coef_i n^{-(p_i-2)/2} prod_{j in I_i} sigma_j with disjoint I_i.
struct NimSpec {
  std::size_t n = 0;
  std::vector<NimTerm> terms;
};

struct NimViolation {
  std::size_t first = 0;
  std::size_t second = 0;
  std::size_t shared_index = 0;
};

struct NimValidation {
  std::vector<NimViolation> intersections;
  std::vector<std::string> errors;  // structural problems (bad order, index out of range, ...)

  bool ok() const { return intersections.empty() && errors.empty(); }
};

inline NimValidation validate_nim(const NimSpec& spec) {
  NimValidation v;
  std::size_t total = 0;
  std::vector<std::size_t> owner;
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const auto& term = spec.terms[t];
    if (term.order() < 2) v.errors.push_back("term " + std::to_string(t) + ": order must be >= 2");
    total += term.indices.size();
    for (std::size_t idx : term.indices) {
      if (idx >= spec.n) {
        v.errors.push_back("term " + std::to_string(t) + ": index " + std::to_string(idx) + " >= n");
        continue;
      }
      if (owner.size() < spec.n) owner.assign(spec.n, kNone);
      if (owner[idx] == t) {
        v.errors.push_back("term " + std::to_string(t) + ": repeated index " + std::to_string(idx));
      } else if (owner[idx] != kNone) {
        v.intersections.push_back({owner[idx], t, idx});
      } else {
        owner[idx] = t;
      }
    }
  }
  if (total > spec.n) v.errors.push_back("total index count exceeds n");
  return v;
}

inline void require_valid(const NimSpec& spec) {
  const auto v = validate_nim(spec);
  if (!v.ok()) throw std::invalid_argument("NimSpec is not a valid non-intersecting model");
}

struct NimPrediction {
  bool all_below = true;
  int p_min = 0;                 // smallest order with a nonzero coefficient
  double log_z = 0.0;            // all-below: predicted total log Z
  double free_energy = 0.0;      // above: predicted (1/n) log Z
  std::size_t dominant_term = 0;
  int dominant_p = 0;
  double h_eff = 0.0;            // beta * coef of the dominant term
  double runner_up_gap = 0.0;    // f_best - f_second
};

/// Free-energy prediction for a NIM model at inverse temperature beta.
/// Below threshold everywhere: p_min = 2 gives sum -1/2 log(1 - (beta H)^2) over
/// the 2-spin terms, p_min >= 3 gives 1/2 n^{2-p_min} sum (beta H)^2 over the
/// p_min-spin terms. Otherwise (1/n) log Z -> f_p of the maximizing term.
inline NimPrediction nim_free_energy_prediction(const NimSpec& spec, double beta,
                                                double tie_tol = 1e-9) {
  require_valid(spec);
  NimPrediction out;
  double best = 0.0, second = 0.0;
  bool any_above = false;
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    const auto& term = spec.terms[i];
    if (term.coef == 0.0) continue;
    const int p = term.order();
    const double h = std::abs(beta * term.coef);
    const double hs = h_star(p);
    if (std::abs(h - hs) <= kCriticalBand) {
      throw GuardTrip("term " + std::to_string(i) + " has |beta H| inside the critical band of H_" +
                      std::to_string(p) + "^*");
    }
    out.p_min = out.p_min == 0 ? p : std::min(out.p_min, p);
    if (h > hs) {
      const double f = f_p(p, h);
      if (!any_above || f > best) {
        second = any_above ? best : 0.0;
        best = f;
        out.dominant_term = i;
        out.dominant_p = p;
        out.h_eff = beta * term.coef;
      } else {
        second = std::max(second, f);
      }
      any_above = true;
    }
  }
  if (any_above) {
    out.all_below = false;
    out.free_energy = best;
    out.runner_up_gap = best - second;
    if (out.runner_up_gap <= tie_tol) {
      throw GuardTrip("multiple dominant terms with equal f_p (tie within " + std::to_string(tie_tol) + ")");
    }
    return out;
  }
  if (out.p_min == 2) {
    for (const auto& term : spec.terms) {
      if (term.order() != 2 || term.coef == 0.0) continue;
      const double k = beta * term.coef;
      out.log_z += -0.5 * std::log1p(-k * k);
    }
  } else if (out.p_min >= 3) {
    double s = 0.0;
    for (const auto& term : spec.terms) {
      if (term.order() == out.p_min) s += (beta * term.coef) * (beta * term.coef);
    }
    out.log_z = 0.5 * std::pow(static_cast<double>(spec.n), 2.0 - out.p_min) * s;
  }
  return out;
}

/// log of one joint Taylor term: term i raised to (even) power k_i.
inline double nim_joint_log_term(const NimSpec& spec, double beta, const std::vector<unsigned>& k) {
  const double dn = static_cast<double>(spec.n);
  double acc = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] == 0) continue;
    const auto& term = spec.terms[i];
    const int p = term.order();
    const double dk = k[i];
    const double c = std::abs(beta * term.coef) * std::pow(dn, -0.5 * (p - 2));
    acc += dk * std::log(c) - std::lgamma(dk + 1.0) + p * log_abs_moment(dk);
    total += p * dk;
  }
  return acc + 0.5 * total * std::log(dn) + log_abs_moment(dn - 1.0) - log_abs_moment(total + dn - 1.0);
}

struct NimSeriesResult {
  double log_z = 0.0;
  std::size_t shells = 0;
  std::size_t evaluations = 0;
};

/// Exact log E exp(beta H_NIM(sigma)) on the sphere by summing the joint series
/// over shells of fixed total half-degree sum k_i / 2. Intended for below-threshold
/// models, where the shells decay geometrically. Gives up after max_evaluations.
inline NimSeriesResult nim_log_partition_series(const NimSpec& spec, double beta, double rel_tol = 1e-10,
                                                std::size_t max_evaluations = 20'000'000) {
  require_valid(spec);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    if (spec.terms[i].coef != 0.0) active.push_back(i);
  }
  NimSeriesResult res;
  if (active.empty() || beta == 0.0) return res;
  const double log_tol = std::log(rel_tol);
  LogSumAccumulator total;
  total.add(0.0);
  std::vector<unsigned> k(spec.terms.size(), 0);
  double prev_shell = 0.0;
  int decreasing = 0;
  for (std::size_t shell = 1;; ++shell) {
    LogSumAccumulator acc;
    // compositions of `shell` into active.size() nonnegative parts
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
      if (pos + 1 == active.size()) {
        k[active[pos]] = static_cast<unsigned>(2 * left);
        acc.add(nim_joint_log_term(spec, beta, k));
        ++res.evaluations;
        return;
      }
      for (std::size_t a = 0; a <= left; ++a) {
        k[active[pos]] = static_cast<unsigned>(2 * a);
        rec(pos + 1, left - a);
      }
    };
    rec(0, shell);
    const double shell_val = acc.value();
    total.add(shell_val);
    res.shells = shell;
    decreasing = shell_val < prev_shell ? decreasing + 1 : 0;
    prev_shell = shell_val;
    if (decreasing >= 3 && shell_val <= total.value() + log_tol) break;
    if (res.evaluations > max_evaluations) {
      throw std::runtime_error("nim_log_partition_series: evaluation budget exhausted");
    }
  }
  res.log_z = total.value();
  return res;
}

struct ProductBoundReport {
  double lhs_log = 0.0;  // log of MC estimate of E exp(sum_I H_I sigma_I)
  double lhs_se = 0.0;   // delta-method SE of lhs_log
  double rhs_log = 0.0;  // sum of single-term series log_sum values
  double margin = 0.0;   // rhs_log - lhs_log
  bool holds = true;     // lhs <= rhs within 3 SE
};

/// Monte Carlo check of E exp(sum) <= prod E exp(term) for disjoint monomials.
inline ProductBoundReport product_bound_check(const NimSpec& spec, std::size_t mc_samples, Stream& stream) {
  require_valid(spec);
  if (spec.n > 20) throw std::invalid_argument("product_bound_check: n must be <= 20");
  if (mc_samples < 2) throw std::invalid_argument("product_bound_check: need at least 2 samples");
  ProductBoundReport r;
  for (const auto& term : spec.terms) {
    if (term.coef != 0.0) r.rhs_log += log_partition_series(spec.n, term.order(), term.coef).log_sum;
  }
  const double dn = static_cast<double>(spec.n);
  SphereConfig x(spec.n);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    uniform_sphere_into(x, stream);
    double e = 0.0;
    for (const auto& term : spec.terms) {
      double prod = term.coef * std::pow(dn, -0.5 * (term.order() - 2));
      for (std::size_t idx : term.indices) prod *= x[idx];
      e += prod;
    }
    const double w = std::exp(e);
    const double delta = w - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (w - mean);
  }
  const double var = m2 / static_cast<double>(mc_samples - 1);
  r.lhs_log = std::log(mean);
  r.lhs_se = std::sqrt(var / static_cast<double>(mc_samples)) / mean;
  r.margin = r.rhs_log - r.lhs_log;
  r.holds = r.margin >= -3.0 * r.lhs_se;
  return r;
}

enum class WindowKind { A, B };

struct ConcentrationWindow {
  std::size_t term = 0;
  int p = 0;
  WindowKind kind = WindowKind::A;
  double lambda = 0.0;
  double center = 0.0;  // lambda n
  double lo = 0.0;
  double hi = 0.0;
};

/// Degree windows lambda_i n (1 +- eps) for every above-threshold term.
/// 2-spin terms get the B label, higher orders A.
inline std::vector<ConcentrationWindow> concentration_sets(const NimSpec& spec, double beta, double eps = 0.1) {
  require_valid(spec);
  std::vector<ConcentrationWindow> out;
  const double dn = static_cast<double>(spec.n);
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    const auto& term = spec.terms[i];
    const int p = term.order();
    const double h = std::abs(beta * term.coef);
    if (!(h > h_star(p) + kCriticalBand)) continue;
    ConcentrationWindow w;
    w.term = i;
    w.p = p;
    w.kind = p == 2 ? WindowKind::B : WindowKind::A;
    w.lambda = lambda_p(p, h);
    w.center = w.lambda * dn;
    w.lo = w.center * (1.0 - eps);
    w.hi = w.center * (1.0 + eps);
    out.push_back(w);
  }
  return out;
}

/// Sign patterns xi in {+1,-1}^p with sign(H) xi_1...xi_p > 0. Bit j set means xi_j = -1.
inline std::vector<std::uint32_t> positive_patterns(int p, double h) {
  if (p < 1 || p > 30) throw std::invalid_argument("positive_patterns: p out of range");
  std::vector<std::uint32_t> out;
  const unsigned want_parity = h < 0.0 ? 1u : 0u;
  for (std::uint32_t m = 0; m < (1u << p); ++m) {
    if ((static_cast<unsigned>(std::popcount(m)) & 1u) == want_parity) out.push_back(m);
  }
  return out;
}

struct GeometryPrediction {
  double t = 0.0;
  int p_dom = 0;
  std::size_t dominant_term = 0;
  std::size_t component_count = 0;
  std::vector<double> overlap_support;  // descending
  int rsb_level = 0;
  bool ultrametric_violation_expected = false;
};

/// Gibbs geometry of the single dominant term. Two configurations in components
/// xi, xi' of M_+ differ in an even number d of signs and have overlap t (p - 2d).
inline GeometryPrediction geometry_prediction(const NimSpec& spec, double beta, double tie_tol = 1e-9) {
  const auto pred = nim_free_energy_prediction(spec, beta, tie_tol);
  if (pred.all_below) throw DomainError("geometry_prediction: no above-threshold term");
  GeometryPrediction g;
  g.p_dom = pred.dominant_p;
  g.dominant_term = pred.dominant_term;
  g.t = t_magnitude(g.p_dom, pred.h_eff);
  g.component_count = positive_patterns(g.p_dom, pred.h_eff).size();
  for (int d = 0; d <= g.p_dom; d += 2) g.overlap_support.push_back(g.t * (g.p_dom - 2 * d));
  g.rsb_level = g.p_dom / 2;
  g.ultrametric_violation_expected = g.p_dom >= 4;
  return g;
}

/// True (overlap concentrates at 0) when every term is below threshold.
inline bool overlap_zero_prediction(const NimSpec& spec, double beta) {
  const auto pred = nim_free_energy_prediction(spec, beta);
  if (!pred.all_below) throw DomainError("overlap_zero_prediction: model has an above-threshold term");
  return true;
}

}  // namespace hpspin

#endif
