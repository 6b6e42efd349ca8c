#ifndef HPSPIN_SPHERE_SAMPLER_HPP
#define HPSPIN_SPHERE_SAMPLER_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "hpspin/common.hpp"
#include "hpspin/full_model.hpp"
#include "hpspin/parallel.hpp"
#include "hpspin/rng.hpp"
#include "hpspin/sphere_point.hpp"

namespace hpspin {

/// Flattened H_n(sigma) = sum alpha(p) H_I n^{-(p-2)/2} sigma_I over the stored couplings.
/// The bulk beyond the retained ranks is not part of the energy.
struct CompiledHamiltonian {
  std::size_t n = 0;
  double beta = 1.0;
  std::vector<std::uint32_t> active;  // coordinates appearing in some term, ascending
  std::vector<double> coef;
  std::vector<int> order;
  std::vector<std::size_t> offset;
  std::vector<std::uint32_t> idx;

  static CompiledHamiltonian build(const CouplingTensor& tensor, const MixtureProfile& profile) {
    CompiledHamiltonian h;
    h.n = tensor.n;
    h.beta = profile.beta;
    const double dn = static_cast<double>(tensor.n);
    for (const auto& b : tensor.blocks) {
      const double a = profile.alpha(b.p);
      if (a == 0.0) continue;
      const double scale = a * std::pow(dn, -0.5 * (b.p - 2));
      for (std::size_t r = 0; r < b.size(); ++r) {
        if (b.values[r] == 0.0) continue;
        h.coef.push_back(scale * b.values[r]);
        h.order.push_back(b.p);
        h.offset.push_back(h.idx.size());
        const auto set = b.index_set(r);
        h.idx.insert(h.idx.end(), set.begin(), set.end());
      }
    }
    h.active = h.idx;
    std::sort(h.active.begin(), h.active.end());
    h.active.erase(std::unique(h.active.begin(), h.active.end()), h.active.end());
    return h;
  }

  std::size_t terms() const { return coef.size(); }

  double energy(const SphereConfig& x) const {
    if (x.size() != n) throw std::invalid_argument("energy: dimension mismatch");
    double e = 0.0;
    for (std::size_t t = 0; t < coef.size(); ++t) {
      double prod = coef[t];
      const std::uint32_t* ix = idx.data() + offset[t];
      for (int j = 0; j < order[t]; ++j) prod *= x[ix[j]];
      e += prod;
    }
    return e;
  }

  void gradient(const SphereConfig& x, std::vector<double>& g) const {
    g.assign(n, 0.0);
    for (std::size_t t = 0; t < coef.size(); ++t) {
      const std::uint32_t* ix = idx.data() + offset[t];
      for (int j = 0; j < order[t]; ++j) {
        double prod = coef[t];
        for (int k = 0; k < order[t]; ++k)
          if (k != j) prod *= x[ix[k]];
        g[ix[j]] += prod;
      }
    }
  }
};

inline double energy(const CouplingTensor& tensor, const MixtureProfile& profile, const SphereConfig& x) {
  return CompiledHamiltonian::build(tensor, profile).energy(x);
}

// ---------------------------------------------------------------------------
// Plain Monte Carlo partition function

struct McEstimate {
  double log_z = 0.0;
  double se = 0.0;  // standard error of log_z (delta method)
  double ess = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::size_t kMcChunk = 1u << 16;

namespace detail {

struct WeightSums {
  LogSumAccumulator w, w2;
};

inline McEstimate finish(const std::vector<WeightSums>& chunks, std::size_t samples, double log_scale) {
  LogSumAccumulator w, w2;
  for (const auto& c : chunks) {
    w.add(c.w.value());
    w2.add(c.w2.value());
  }
  McEstimate e;
  e.samples = samples;
  const double dn = static_cast<double>(samples);
  e.log_z = w.value() - std::log(dn) + log_scale;
  e.ess = std::exp(2.0 * w.value() - w2.value());
  const double rel_var = std::max(0.0, dn / e.ess - 1.0);
  e.se = std::sqrt(rel_var / dn);
  return e;
}

/// Shared driver: `sign_mask` >= 0 forces the signs of `fixed` coordinates to that pattern.
inline McEstimate mc_driver(const CompiledHamiltonian& h, std::size_t samples, std::uint64_t seed,
                            const std::vector<std::uint32_t>& fixed, long long sign_mask,
                            std::size_t workers) {
  if (h.n > 24) throw std::invalid_argument("mc_log_partition: plain Monte Carlo requires n <= 24");
  if (samples < 100'000) throw std::invalid_argument("mc_log_partition: samples must be >= 1e5");
  const std::size_t chunks = (samples + kMcChunk - 1) / kMcChunk;
  std::vector<WeightSums> sums(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    Stream s = Stream::derive(seed, 0x6d63u, c);
    SphereConfig x(h.n);
    const std::size_t lo = c * kMcChunk, hi = std::min(samples, lo + kMcChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      uniform_sphere_into(x, s);
      if (sign_mask >= 0) {
        for (std::size_t j = 0; j < fixed.size(); ++j) {
          const bool neg = ((sign_mask >> j) & 1) != 0;
          x[fixed[j]] = neg ? -std::abs(x[fixed[j]]) : std::abs(x[fixed[j]]);
        }
      }
      const double lw = h.beta * h.energy(x);
      sums[c].w.add(lw);
      sums[c].w2.add(2.0 * lw);
    }
  });
  const double log_scale = sign_mask >= 0 ? -static_cast<double>(fixed.size()) * std::log(2.0) : 0.0;
  auto est = finish(sums, samples, log_scale);
  if (est.ess < 100.0) {
    throw GuardTrip("mc_log_partition: effective sample size below 100; use the orthant-stratified mode");
  }
  return est;
}

}  // namespace detail

/// log E exp(beta H_n(sigma)) for sigma uniform on the sphere, n <= 24.
inline McEstimate mc_log_partition(const CompiledHamiltonian& h, std::size_t samples, std::uint64_t seed,
                                   std::size_t workers = 1) {
  return detail::mc_driver(h, samples, seed, {}, -1, workers);
}

/// log E[exp(beta H_n) 1{sign(sigma_j) = pattern_j for j in fixed}]. Uniform draws
/// are folded into the orthant, which maps the uniform law onto the uniform law
/// conditioned on the orthant, and the orthant mass 2^{-|fixed|} is applied.
inline McEstimate mc_log_partition_orthant(const CompiledHamiltonian& h, std::size_t samples,
                                           std::uint64_t seed, const std::vector<std::uint32_t>& fixed,
                                           std::uint32_t pattern, std::size_t workers = 1) {
  if (fixed.size() > 30) throw std::invalid_argument("mc_log_partition_orthant: too many fixed signs");
  return detail::mc_driver(h, samples, seed, fixed, static_cast<long long>(pattern), workers);
}

// ---------------------------------------------------------------------------
// Metropolis chains

struct ChainOptions {
  std::size_t steps = 10000;
  double proposal_scale = 0.1;  // per-coordinate std of the tangent proposal
  bool autotune = true;         // during the first burn_in_fraction of steps
  double burn_in_fraction = 0.1;
  std::size_t thin = 10;        // observer cadence after burn-in
  bool flip_moves = true;       // one sign-flip proposal per step on an active coordinate
};

struct ChainResult {
  SphereConfig final_state;
  double acceptance_rate = 0.0;  // after burn-in
  double proposal_scale = 0.0;   // frozen value
  std::size_t steps = 0;
};

using ChainObserver = std::function<void(std::size_t step, const SphereConfig&)>;

/// Random-walk Metropolis for G_n ~ exp(beta H_n): a tangent Gaussian step is
/// projected radially back to the sphere, which is a symmetric proposal. With
/// flip_moves each step also proposes negating one uniformly chosen active
/// coordinate; flips keep the radius and are their own inverse, so the target is
/// unchanged, but a chain started in an orthant of wrong sign can leave it without
/// collapsing through the small-magnitude region.
inline ChainResult mcmc_chain(const CompiledHamiltonian& h, const ChainOptions& opt, SphereConfig init,
                              Stream& stream, const ChainObserver& observe = {}) {
  if (opt.steps < 1) throw std::invalid_argument("mcmc_chain: steps must be >= 1");
  if (init.size() != h.n) throw std::invalid_argument("mcmc_chain: init has wrong dimension");
  project_to_sphere(init);
  const double dn = static_cast<double>(h.n);
  const auto burn = static_cast<std::size_t>(opt.burn_in_fraction * static_cast<double>(opt.steps));
  SphereConfig x = std::move(init), y(h.n);
  double e = h.energy(x);
  double scale = opt.proposal_scale;
  std::size_t window_acc = 0, window = 0, acc_after = 0;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    double dot = 0.0;
    for (std::size_t i = 0; i < h.n; ++i) {
      y[i] = scale * stream.normal();
      dot += y[i] * x[i];
    }
    const double c = dot / dn;
    for (std::size_t i = 0; i < h.n; ++i) y[i] = x[i] + (y[i] - c * x[i]);
    project_to_sphere(y);
    const double e_new = h.energy(y);
    const double log_a = h.beta * (e_new - e);
    const bool accept = log_a >= 0.0 || std::log(stream.uniform_open()) < log_a;
    if (accept) {
      std::swap(x, y);
      e = e_new;
    }
    if (opt.flip_moves && !h.active.empty()) {
      const std::uint32_t i = h.active[stream.below(h.active.size())];
      x[i] = -x[i];
      const double e_flip = h.energy(x);
      const double log_f = h.beta * (e_flip - e);
      if (log_f >= 0.0 || std::log(stream.uniform_open()) < log_f) e = e_flip;
      else x[i] = -x[i];
    }
    if (step < burn) {
      window_acc += accept;
      if (++window == 100) {
        const double rate = static_cast<double>(window_acc) / 100.0;
        if (opt.autotune) {
          if (rate < 0.3) scale *= 0.8;
          else if (rate > 0.5) scale *= 1.25;
        }
        window = window_acc = 0;
      }
    } else {
      acc_after += accept;
      if (observe && opt.thin > 0 && (step - burn) % opt.thin == 0) observe(step, x);
    }
  }
  ChainResult r;
  r.final_state = std::move(x);
  r.steps = opt.steps;
  r.proposal_scale = scale;
  const std::size_t post = opt.steps - burn;
  r.acceptance_rate = post > 0 ? static_cast<double>(acc_after) / static_cast<double>(post) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Replica batches

struct ReplicaOptions {
  ChainOptions chain;
  std::vector<std::uint32_t> dominant;  // empty: uniform starts, no pattern bookkeeping
  std::size_t chains_per_pattern = 4;   // with dominant set; otherwise total chain count
  double start_square = 0.0;            // sigma_i^2 / n at planted starts; 0 selects 1/(2p)
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct ReplicaBatch {
  std::vector<SphereConfig> configs;  // final state per chain
  std::vector<std::size_t> chain_ids;
  std::vector<std::uint32_t> start_pattern;
  std::vector<double> acceptance;
  std::vector<std::size_t> steps;
  std::vector<std::uint32_t> dominant;
  // per-chain post-burn-in averages over observed states
  std::vector<std::vector<double>> mean_square;     // [chain][j] mean sigma_{dominant j}^2 / n
  std::vector<std::vector<double>> mean_square2;    // [chain][j] mean (sigma^2/n)^2
  std::vector<std::vector<double>> pattern_time;    // [chain][mask] fraction of observed states
  std::vector<std::size_t> crossings;               // pattern changes between observations
};

inline std::uint32_t sign_pattern(const SphereConfig& x, const std::vector<std::uint32_t>& dominant) {
  std::uint32_t m = 0;
  for (std::size_t j = 0; j < dominant.size(); ++j)
    if (x[dominant[j]] < 0.0) m |= 1u << j;
  return m;
}

/// Independent chains with private streams. With a dominant set, every sign
/// pattern of it gets chains_per_pattern chains started with |sigma_j|^2 = start_square n
/// on the dominant coordinates and a uniform point of the remaining mass elsewhere.
inline ReplicaBatch run_replicas(const CompiledHamiltonian& h, const ReplicaOptions& opt) {
  const std::size_t p = opt.dominant.size();
  if (p > 20) throw std::invalid_argument("run_replicas: dominant set too large");
  const std::size_t patterns = p == 0 ? 1 : (std::size_t{1} << p);
  const std::size_t chains = patterns * opt.chains_per_pattern;
  ReplicaBatch b;
  b.dominant = opt.dominant;
  b.configs.resize(chains);
  b.chain_ids.resize(chains);
  b.start_pattern.resize(chains);
  b.acceptance.resize(chains);
  b.steps.resize(chains);
  b.mean_square.resize(chains);
  b.mean_square2.resize(chains);
  b.pattern_time.resize(chains);
  b.crossings.resize(chains);
  const double dn = static_cast<double>(h.n);
  const double sq = p == 0 ? 0.0 : (opt.start_square > 0.0 ? opt.start_square : 1.0 / (2.0 * p));
  if (sq * p >= 1.0) throw std::invalid_argument("run_replicas: start_square * p must be < 1");
  parallel_for(chains, opt.workers, [&](std::size_t c) {
    Stream s = Stream::derive(opt.seed, 0x6368u, c);
    const auto pattern = static_cast<std::uint32_t>(c / opt.chains_per_pattern);
    SphereConfig x = uniform_sphere(h.n, s);
    if (p > 0) {
      std::vector<char> is_dom(h.n, 0);
      for (auto i : opt.dominant) is_dom[i] = 1;
      double rest = 0.0;
      for (std::size_t i = 0; i < h.n; ++i)
        if (!is_dom[i]) rest += x[i] * x[i];
      const double rest_scale = std::sqrt(dn * (1.0 - sq * p) / rest);
      for (std::size_t i = 0; i < h.n; ++i)
        if (!is_dom[i]) x[i] *= rest_scale;
      for (std::size_t j = 0; j < p; ++j) {
        const double mag = std::sqrt(sq * dn);
        x[opt.dominant[j]] = ((pattern >> j) & 1u) ? -mag : mag;
      }
    }
    std::vector<double> m1(p, 0.0), m2(p, 0.0), pt(patterns, 0.0);
    std::size_t observed = 0, cross = 0;
    std::uint32_t last = p > 0 ? sign_pattern(x, opt.dominant) : 0;
    auto obs = [&](std::size_t, const SphereConfig& st) {
      ++observed;
      for (std::size_t j = 0; j < p; ++j) {
        const double v = st[opt.dominant[j]] * st[opt.dominant[j]] / dn;
        m1[j] += v;
        m2[j] += v * v;
      }
      if (p > 0) {
        const auto m = sign_pattern(st, opt.dominant);
        pt[m] += 1.0;
        cross += m != last;
        last = m;
      }
    };
    auto res = mcmc_chain(h, opt.chain, std::move(x), s, obs);
    const double denom = observed > 0 ? static_cast<double>(observed) : 1.0;
    for (auto& v : m1) v /= denom;
    for (auto& v : m2) v /= denom;
    for (auto& v : pt) v /= denom;
    b.configs[c] = std::move(res.final_state);
    b.chain_ids[c] = c;
    b.start_pattern[c] = pattern;
    b.acceptance[c] = res.acceptance_rate;
    b.steps[c] = res.steps;
    b.mean_square[c] = std::move(m1);
    b.mean_square2[c] = std::move(m2);
    b.pattern_time[c] = std::move(pt);
    b.crossings[c] = cross;
  });
  return b;
}

// ---------------------------------------------------------------------------
// Estimators

struct OverlapStats {
  std::size_t pairs = 0;
  double mean = 0.0;
  double second_moment = 0.0;
  double second_moment_se = 0.0;
  double restricted_mean = 0.0;
  double restricted_second_moment = 0.0;
  double restricted_second_moment_se = 0.0;
  std::vector<double> values;
  std::vector<double> restricted_values;
  std::vector<std::size_t> histogram;  // 40 bins on [-1, 1]
};

/// Pairwise overlaps over all chain pairs of `configs`; the restricted overlap
/// drops the coordinates in `exclude` from the sum but keeps the 1/n normalization.
inline OverlapStats replica_overlaps(const std::vector<SphereConfig>& configs,
                                     const std::vector<std::uint32_t>& exclude) {
  if (configs.size() < 2) throw std::invalid_argument("replica_overlaps: need >= 2 chains");
  OverlapStats s;
  s.histogram.assign(40, 0);
  const std::size_t n = configs.front().size();
  std::vector<char> skip(n, 0);
  for (auto i : exclude) skip[i] = 1;
  for (std::size_t a = 0; a < configs.size(); ++a) {
    for (std::size_t b = a + 1; b < configs.size(); ++b) {
      double full = 0.0, restricted = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = configs[a][i] * configs[b][i];
        full += v;
        if (!skip[i]) restricted += v;
      }
      full /= static_cast<double>(n);
      restricted /= static_cast<double>(n);
      s.values.push_back(full);
      s.restricted_values.push_back(restricted);
      const auto bin = static_cast<std::size_t>(std::clamp((full + 1.0) * 20.0, 0.0, 39.0));
      ++s.histogram[bin];
    }
  }
  s.pairs = s.values.size();
  auto moments = [&](const std::vector<double>& v, double& mean, double& m2, double& se) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (double x : v) {
      a += x;
      b += x * x;
      c += x * x * x * x;
    }
    const double k = static_cast<double>(v.size());
    mean = a / k;
    m2 = b / k;
    se = std::sqrt(std::max(0.0, c / k - m2 * m2) / k);
  };
  moments(s.values, s.mean, s.second_moment, s.second_moment_se);
  moments(s.restricted_values, s.restricted_mean, s.restricted_second_moment, s.restricted_second_moment_se);
  return s;
}

inline OverlapStats replica_overlaps(const ReplicaBatch& batch, const std::vector<std::uint32_t>& exclude) {
  return replica_overlaps(batch.configs, exclude);
}

struct OccupancyReport {
  std::vector<double> frequency;  // per sign pattern of the dominant set
  std::vector<double> se;         // across-chain standard error
  std::vector<std::uint32_t> positive;  // patterns with H * prod sign > 0
  double negative_mass = 0.0;
  double max_positive_gap_sigma = 0.0;  // max |f_x - f_y| / sqrt(se_x^2 + se_y^2) over positive pairs
};

/// Stratified occupancy: each chain's time fractions weighted by the uniform
/// mass of its start orthant; with equal chains per start this is the pooled mean.
inline OccupancyReport occupancy(const ReplicaBatch& batch, double h_sign) {
  const std::size_t p = batch.dominant.size();
  if (p == 0) throw std::invalid_argument("occupancy: batch has no dominant set");
  const std::size_t patterns = std::size_t{1} << p;
  OccupancyReport r;
  r.frequency.assign(patterns, 0.0);
  r.se.assign(patterns, 0.0);
  const double chains = static_cast<double>(batch.pattern_time.size());
  for (std::size_t m = 0; m < patterns; ++m) {
    double a = 0.0, b = 0.0;
    for (const auto& pt : batch.pattern_time) {
      a += pt[m];
      b += pt[m] * pt[m];
    }
    r.frequency[m] = a / chains;
    const double var = chains > 1 ? std::max(0.0, (b - a * a / chains) / (chains - 1.0)) : 0.0;
    r.se[m] = std::sqrt(var / chains);
  }
  r.positive = positive_patterns(static_cast<int>(p), h_sign);
  std::vector<char> pos(patterns, 0);
  for (auto m : r.positive) pos[m] = 1;
  for (std::size_t m = 0; m < patterns; ++m)
    if (!pos[m]) r.negative_mass += r.frequency[m];
  for (std::size_t i = 0; i < r.positive.size(); ++i) {
    for (std::size_t j = i + 1; j < r.positive.size(); ++j) {
      const auto x = r.positive[i], y = r.positive[j];
      const double s = std::sqrt(r.se[x] * r.se[x] + r.se[y] * r.se[y]);
      const double gap = std::abs(r.frequency[x] - r.frequency[y]);
      r.max_positive_gap_sigma = std::max(r.max_positive_gap_sigma, s > 0.0 ? gap / s : (gap > 0.0 ? 1e300 : 0.0));
    }
  }
  return r;
}

struct MagnitudeStats {
  std::vector<double> mean;      // per index, mean sigma_i^2 / n
  std::vector<double> variance;  // per index, Gibbs variance of sigma_i^2 / n
  std::vector<double> se;        // across-chain standard error of the mean
};

/// sigma_i^2 / n statistics on the dominant coordinates from the per-chain averages,
/// or, for other indices, from the final states.
inline MagnitudeStats spin_magnitude(const ReplicaBatch& batch) {
  MagnitudeStats s;
  const std::size_t p = batch.dominant.size();
  const double chains = static_cast<double>(batch.mean_square.size());
  for (std::size_t j = 0; j < p; ++j) {
    double a = 0.0, b = 0.0, m2 = 0.0;
    for (std::size_t c = 0; c < batch.mean_square.size(); ++c) {
      a += batch.mean_square[c][j];
      b += batch.mean_square[c][j] * batch.mean_square[c][j];
      m2 += batch.mean_square2[c][j];
    }
    const double mean = a / chains;
    s.mean.push_back(mean);
    s.variance.push_back(std::max(0.0, m2 / chains - mean * mean));
    const double var = chains > 1 ? std::max(0.0, (b - a * a / chains) / (chains - 1.0)) : 0.0;
    s.se.push_back(std::sqrt(var / chains));
  }
  return s;
}

inline MagnitudeStats spin_magnitude(const std::vector<SphereConfig>& configs,
                                     const std::vector<std::uint32_t>& indices) {
  MagnitudeStats s;
  const double k = static_cast<double>(configs.size());
  for (auto i : indices) {
    double a = 0.0, b = 0.0;
    for (const auto& x : configs) {
      const double v = x[i] * x[i] / static_cast<double>(x.size());
      a += v;
      b += v * v;
    }
    const double mean = a / k;
    const double var = std::max(0.0, b / k - mean * mean);
    s.mean.push_back(mean);
    s.variance.push_back(var);
    s.se.push_back(std::sqrt(var / k));
  }
  return s;
}

struct UltrametricReport {
  std::size_t triples = 0;  // ordered triples of distinct chains
  std::size_t violations = 0;
  double frequency = 0.0;
};

/// Frequency of R_{1,3} < min(R_{1,2}, R_{2,3}) - margin over ordered chain triples.
inline UltrametricReport ultrametric_test(const std::vector<SphereConfig>& configs, double margin) {
  if (configs.size() < 3) throw std::invalid_argument("ultrametric_test: need >= 3 chains");
  const std::size_t k = configs.size();
  std::vector<double> r(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) r[a * k + b] = r[b * k + a] = overlap(configs[a], configs[b]);
  UltrametricReport u;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      for (std::size_t l = 0; l < k; ++l) {
        if (l == i || l == j) continue;
        ++u.triples;
        if (r[i * k + l] < std::min(r[i * k + j], r[j * k + l]) - margin) ++u.violations;
      }
    }
  u.frequency = static_cast<double>(u.violations) / static_cast<double>(u.triples);
  return u;
}

// ---------------------------------------------------------------------------
// Numeric ground state

struct GseNumeric {
  double value = 0.0;  // best H_n(sigma) / n
  SphereConfig config;
  std::size_t restarts_run = 0;
};

/// Projected gradient ascent from one start: step, renormalize, and halve the step
/// on any decrease; stops when the step underflows.
inline double ascend(const CompiledHamiltonian& h, SphereConfig& x, std::size_t max_iter = 20000) {
  std::vector<double> g;
  SphereConfig y(h.n);
  double e = h.energy(x);
  double eta = 0.1;
  for (std::size_t it = 0; it < max_iter && eta > 1e-14; ++it) {
    h.gradient(x, g);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    if (!(gn > 0.0)) break;
    const double step = eta * std::sqrt(static_cast<double>(h.n) / gn);
    for (std::size_t i = 0; i < h.n; ++i) y[i] = x[i] + step * g[i];
    project_to_sphere(y);
    const double e_new = h.energy(y);
    if (e_new > e) {
      std::swap(x, y);
      e = e_new;
      eta = std::min(1.0, eta * 1.5);
    } else {
      eta *= 0.5;
    }
  }
  return e;
}

/// Best of `restarts` uniform starts and perturbed planted starts (+-sqrt(n/p) on the
/// top `planted_per_order` couplings of every order, signs matching the coupling).
/// The Hamiltonian omits beta.
inline GseNumeric gse_optimize(const CouplingTensor& tensor, const MixtureProfile& profile,
                               std::size_t restarts, std::uint64_t seed, std::size_t planted_per_order = 3) {
  if (restarts < 1) throw std::invalid_argument("gse_optimize: restarts must be >= 1");
  MixtureProfile prof = profile;
  prof.beta = 1.0;
  const auto h = CompiledHamiltonian::build(tensor, prof);
  const double dn = static_cast<double>(tensor.n);
  GseNumeric best;
  best.value = -std::numeric_limits<double>::infinity();
  auto consider = [&](SphereConfig x) {
    const double e = ascend(h, x) / dn;
    ++best.restarts_run;
    if (e > best.value) {
      best.value = e;
      best.config = std::move(x);
    }
  };
  Stream s = Stream::derive(seed, 0x6773u, 0);
  if (h.terms() == 0) {
    best.value = 0.0;
    best.config = uniform_sphere(tensor.n, s);
    best.restarts_run = 1;
    return best;
  }
  for (const auto& b : tensor.blocks) {
    const double a = profile.alpha(b.p);
    if (a == 0.0) continue;
    for (std::size_t r = 0; r < std::min(planted_per_order, b.size()); ++r) {
      SphereConfig x(tensor.n);
      for (auto& v : x) v = 0.1 * s.normal();
      const double mag = std::sqrt(dn / b.p);
      const auto set = b.index_set(r);
      for (std::size_t j = 0; j < set.size(); ++j) x[set[j]] = mag;
      if (a * b.values[r] < 0.0) x[set[0]] = -mag;
      project_to_sphere(x);
      consider(std::move(x));
    }
  }
  for (std::size_t r = 0; r < restarts; ++r) consider(uniform_sphere(tensor.n, s));
  return best;
}

// ---------------------------------------------------------------------------
// Binary chain frames: u64 n, u64 step, n x f64 coordinates, little-endian.

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& v) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) return false;
  v = to_little(v);
  return true;
}

}  // namespace detail

inline void write_frame(std::ostream& out, std::uint64_t step, const SphereConfig& x) {
  detail::put<std::uint64_t>(out, x.size());
  detail::put<std::uint64_t>(out, step);
  for (double v : x) detail::put<double>(out, v);
}

/// Returns false at a clean end of stream; throws on a truncated frame.
inline bool read_frame(std::istream& in, std::uint64_t& step, SphereConfig& x) {
  std::uint64_t n = 0;
  if (!detail::get(in, n)) return false;
  if (!detail::get(in, step)) throw std::runtime_error("read_frame: truncated header");
  x.resize(n);
  for (auto& v : x)
    if (!detail::get(in, v)) throw std::runtime_error("read_frame: truncated coordinates");
  return true;
}

}  // namespace hpspin

#endif
