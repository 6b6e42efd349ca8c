// One line per criterion: "ACnn PASS|FAIL  <measured values>".
// Usage: acceptance [--only ID]   (ID like 07 or 11b). Exit status 1 if any run criterion fails.
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hpspin/full_model.hpp"
#include "hpspin/gaussian_moments.hpp"
#include "hpspin/monomial_partition.hpp"
#include "hpspin/nim_model.hpp"
#include "hpspin/phase_functions.hpp"
#include "hpspin/sphere_sampler.hpp"

using namespace hpspin;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, std::string note) {
    pass = pass && ok;
    notes.push_back((ok ? "" : "[x] ") + std::move(note));
  }
};

MixtureProfile single(int p, double a = 1.0, double beta = 1.0) {
  MixtureProfile m;
  m.alphas[p] = a;
  m.beta = beta;
  return m;
}

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------

Outcome ac01() {
  Outcome o;
  double worst_l = 0.0, worst_f = 0.0;
  for (double h : {1.5, 2.0, 3.0, 5.0}) {
    worst_l = std::max(worst_l, std::abs(lambda_p(2, h) - (h - 1) / 4));
    worst_f = std::max(worst_f, std::abs(f_p(2, h) - ((h - 1) / 2 - 0.5 * std::log(h))));
  }
  o.check(worst_l == 0.0, fmt::format("max|lambda_2-(H-1)/4|={:.3g}", worst_l));
  o.check(h_star(2) == 1.0, fmt::format("H_2*={}", h_star(2)));
  o.check(worst_f < 1e-9, fmt::format("max|f_2-closed|={:.3g} (tol 1e-9)", worst_f));
  return o;
}

Outcome ac02() {
  Outcome o;
  for (int p = 3; p <= 8; ++p) {
    const double hs = h_star(p);
    const double bound = std::pow(p, p - 1) / (2.0 * std::pow(p - 2.0, 0.5 * (p - 2)));
    const double res = std::abs(f_p_certified(p, hs, hs).value);
    const double g = std::abs(g_value(p, lambda_p(p, hs), hs));
    o.check(g < 1e-9 && res < 1e-9 && hs > bound,
            fmt::format("p={} H*={:.8g} bound={:.6g} |g|={:.2g}", p, hs, bound, g));
  }
  return o;
}

Outcome ac03() {
  Outcome o;
  const auto prof = log_partition_series(5000, 2, 0.5);
  const double err = std::abs(prof.log_sum + 0.5 * std::log(1 - 0.25));
  o.check(err < 0.01, fmt::format("logZ={:.6f} closed={:.6f} err={:.3g} (tol 0.01)", prof.log_sum,
                                  -0.5 * std::log(0.75), err));
  return o;
}

struct AboveCase {
  int p;
  double h;
  const char* label;
};

std::vector<AboveCase> above_cases() {
  return {{2, 3.0, "(2,3)"}, {3, 1.5 * h_star(3), "(3,1.5H3*)"}, {4, 1.2 * h_star(4), "(4,1.2H4*)"}};
}

Outcome ac04() {
  Outcome o;
  for (const auto& c : above_cases()) {
    double prev = std::numeric_limits<double>::infinity();
    bool ok = true;
    std::string line = c.label;
    for (std::size_t n : {500u, 1000u, 2000u}) {
      const auto prof = log_partition_series(n, c.p, c.h);
      const double err = std::abs(prof.log_sum / n - f_p(c.p, c.h));
      const double tol = 5 * std::log(n) / n;
      ok = ok && err <= tol && err < prev;
      line += fmt::format(" n={}:{:.3g}/{:.3g}", n, err, tol);
      prev = err;
    }
    o.check(ok, line);
  }
  return o;
}

Outcome ac05() {
  Outcome o;
  for (const auto& c : above_cases()) {
    const auto w = concentration_window(log_partition_series(2000, c.p, c.h), 0.1);
    o.check(!w.below && w.rel_gap < 0.05 && w.window_mass > 0.99,
            fmt::format("{} argmax/n={:.4f} lambda={:.4f} gap={:.3g} mass={:.5f}", c.label, w.argmax_fraction,
                        w.lambda_pred, w.rel_gap, w.window_mass));
  }
  return o;
}

Outcome ac06() {
  Outcome o;
  {
    const std::size_t n = 10, N = 1000000;
    Stream s(2024, 6);
    SphereConfig x(n);
    double a = 0, b = 0;
    for (std::size_t k = 0; k < N; ++k) {
      uniform_sphere_into(x, s);
      const double v = std::pow(x[0], 4);
      a += v;
      b += v * v;
    }
    const double mean = a / N, se = std::sqrt((b / N - mean * mean) / N);
    const double exact = 3.0 * n / (n + 2.0);
    const std::vector<unsigned> e{4};
    o.check(std::abs(mean - exact) <= 3 * se && std::abs(sphere_moment(n, e, false).value() - exact) < 1e-12,
            fmt::format("E s1^4: MC={:.5f} exact={:.5f} se={:.2g}", mean, exact, se));
  }
  struct Case {
    std::size_t n;
    int p;
    double h;
  };
  const std::vector<Case> cases = {
      {12, 2, 0.5}, {14, 2, 2.0}, {12, 3, 2.0}, {10, 3, 1.5 * h_star(3)}, {14, 4, 0.5 * h_star(4)}};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(c.p));
    std::iota(idx.begin(), idx.end(), 0u);
    const auto ham = CompiledHamiltonian::build(CouplingTensor::planted(c.n, {{c.p, idx, c.h}}), single(c.p));
    const auto mc = mc_log_partition(ham, 2000000, 600 + i, workers());
    const double series = log_partition_series(c.n, c.p, c.h).log_sum;
    const char* phase = std::abs(c.h) > h_star(c.p) ? "above" : "below";
    o.check(std::abs(mc.log_z - series) <= 3 * mc.se,
            fmt::format("n={} p={} H={:.4g} ({}): MC={:.5f}+-{:.2g} series={:.5f}", c.n, c.p, c.h, phase, mc.log_z,
                        mc.se, series));
  }
  return o;
}

/// Planted single dominant coupling on {0..p-1} with h_eff = factor * H_p^*.
CouplingTensor planted_dominant(std::size_t n, int p, double factor) {
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0u);
  return CouplingTensor::planted(n, {{p, idx, factor * h_star(p)}});
}

ReplicaBatch planted_batch(const CouplingTensor& t, const MixtureProfile& prof, std::size_t steps,
                           std::size_t per_pattern, std::uint64_t seed, std::vector<std::uint32_t> dom) {
  ReplicaOptions opt;
  opt.dominant = std::move(dom);
  opt.chain.steps = steps;
  opt.chain.proposal_scale = 0.05;
  opt.chains_per_pattern = per_pattern;
  opt.seed = seed;
  opt.workers = workers();
  return run_replicas(CompiledHamiltonian::build(t, prof), opt);
}

Outcome ac07() {
  Outcome o;
  const std::size_t n = 300;
  const auto t = planted_dominant(n, 3, 1.5);
  const auto prof = single(3);
  const auto rep = classify_regime(t, prof);
  o.check(rep.kind == RegimeKind::Fdom && rep.p_dom == 3, std::string("regime ") + to_string(rep.kind));
  const double tpred = t_magnitude(3, 1.5 * h_star(3));
  const auto b = planted_batch(t, prof, 20000, 4, 7, rep.dom_indices);
  const auto mag = spin_magnitude(b);
  for (std::size_t j = 0; j < mag.mean.size(); ++j)
    o.check(std::abs(mag.mean[j] - tpred) <= 0.05 * tpred,
            fmt::format("sigma_{}^2/n={:.4f} t={:.4f}", b.dominant[j], mag.mean[j], tpred));
  const auto ov = replica_overlaps(b, b.dominant);
  o.check(ov.restricted_second_moment < 0.01, fmt::format("<R_restricted^2>={:.3g} (tol 0.01)",
                                                          ov.restricted_second_moment));
  const auto occ = occupancy(b, rep.h_dom);
  o.check(occ.negative_mass < 0.02, fmt::format("negative mass={:.3g} (tol 0.02)", occ.negative_mass));
  std::string freqs;
  for (auto m : occ.positive) freqs += fmt::format(" {:.3f}", occ.frequency[m]);
  o.check(occ.max_positive_gap_sigma <= 3.0,
          fmt::format("positive components{} max gap={:.2f} SE", freqs, occ.max_positive_gap_sigma));
  return o;
}

Outcome ac08() {
  Outcome o;
  const std::size_t n = 300;
  for (int p : {4, 3}) {
    const auto t = planted_dominant(n, p, 1.5);
    const auto prof = single(p);
    const auto rep = classify_regime(t, prof);
    const double tp = rep.geometry->t;
    const auto b = planted_batch(t, prof, 20000, 4, 80 + p, rep.dom_indices);
    const auto u = ultrametric_test(b.configs, 0.5 * tp);
    if (p >= 4) {
      const double bound = 0.5 * std::pow(std::ldexp(1.0, 1 - p), 2);
      o.check(u.frequency >= bound,
              fmt::format("p={} freq={:.4f} >= {:.5f} ({} triples)", p, u.frequency, bound, u.triples));
    } else {
      o.check(u.frequency < 0.005, fmt::format("p={} freq={:.5f} < 0.005 ({} triples)", p, u.frequency, u.triples));
    }
  }
  return o;
}

Outcome ac09() {
  Outcome o;
  const std::size_t n = 400;
  struct Case {
    int p;
    double h;
  };
  const std::vector<Case> cases = {{2, 4.0}, {3, 9.0}, {4, 40.0}};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    // dominant coupling plus weak random background of orders 2..4, which may touch the dominant set
    std::vector<CouplingTensor::Planted> terms;
    std::vector<std::uint32_t> dom;
    for (int j = 0; j < c.p; ++j) dom.push_back(17u * static_cast<std::uint32_t>(j) + 3u);
    terms.push_back({c.p, dom, c.h});
    Stream s = Stream::derive(909, i, 0);
    MixtureProfile prof;
    for (int q = 2; q <= 4; ++q) {
      prof.alphas[q] = 1.0;
      for (int k = 0; k < 20; ++k) terms.push_back({q, random_subset(n, q, s), 0.05 * (2 * s.uniform_open() - 1)});
    }
    const auto t = CouplingTensor::planted(n, terms);
    const auto an = gse_analytic(t, prof);
    const auto num = gse_optimize(t, prof, 5, 90 + i);
    const double rel = std::abs(num.value - an.value) / an.value;
    double worst = 0.0;
    const double target = std::sqrt(static_cast<double>(n) / c.p);
    for (auto idx : dom) worst = std::max(worst, std::abs(std::abs(num.config[idx]) - target) / target);
    o.check(an.p == c.p && rel < 0.02 && worst < 0.02,
            fmt::format("p={} H={} analytic={:.5f} numeric={:.5f} rel={:.3g} |sigma| dev={:.3g}", c.p, c.h, an.value,
                        num.value, rel, worst));
  }
  return o;
}

Outcome ac10() {
  Outcome o;
  const std::size_t n = 142;  // C(142,2) = 10011
  const double alpha = 1.0;
  const auto law = TailLaw::constant(alpha);
  std::vector<double> maxima(2000);
  parallel_for(maxima.size(), workers(), [&](std::size_t t) {
    const auto tensor = sample_model(single(2), law, n, 1, 10'000 + t);
    maxima[t] = std::abs(tensor.blocks[0].values[0]);
  });
  const double ks = frechet_gof(maxima, alpha);
  o.check(ks < 0.05, fmt::format("KS={:.4f} over 2000 trials at C(n,p)={}", ks, binomial_u64(n, 2)));
  MixtureProfile m;
  m.alphas = {{2, 0.5}, {3, 2.0}, {4, 8.0}};
  const auto rp = regime_probabilities(m, alpha, 20000, 1010, workers());
  const double q = p1_product_quadrature(m, alpha);
  o.check(std::abs(rp.p1 - q) <= 2 * rp.p1_se,
          fmt::format("p1 MC={:.5f}+-{:.2g} quadrature={:.5f}", rp.p1, rp.p1_se, q));
  return o;
}

Outcome ac11a() {
  Outcome o;
  const std::size_t n = 500;
  MixtureProfile prof;
  prof.alphas = {{2, 1.0}, {3, 1.0}};
  const auto t = CouplingTensor::planted(n, {{2, {0, 1}, 0.5}, {2, {2, 3}, -0.3}, {3, {4, 5, 6}, 0.5 * h_star(3)}});
  const auto rep = classify_regime(t, prof);
  o.check(rep.kind == RegimeKind::F1, std::string("regime ") + to_string(rep.kind));
  const auto b = planted_batch(t, prof, 20000, 24, 111, {});
  const auto ov = replica_overlaps(b, {});
  o.check(ov.second_moment < 0.01, fmt::format("<R^2>={:.4g} (1/n={:.4g}, tol 0.01) over {} pairs", ov.second_moment,
                                               1.0 / n, ov.pairs));
  return o;
}

Outcome ac11b() {
  Outcome o;
  const std::size_t n = 14;
  const std::vector<double> ks = {0.6, 0.4, 0.25};
  std::vector<CouplingTensor::Planted> terms;
  NimSpec spec{n, {}};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto a = static_cast<std::uint32_t>(2 * i);
    terms.push_back({2, {a, a + 1}, ks[i]});
    spec.terms.push_back({ks[i], {a, a + 1u}});
  }
  const auto t = CouplingTensor::planted(n, terms);
  const auto prof = single(2);
  // the default guard 10/n would be 0.71 here and swallow K=0.6 into the critical band
  const auto rep = classify_regime(t, prof, 1e-3);
  const auto mc = mc_log_partition(CompiledHamiltonian::build(t, prof), 4000000, 1111, workers());
  const double exact = nim_log_partition_series(spec, 1.0).log_z;
  o.check(rep.kind == RegimeKind::F1 && std::abs(mc.log_z - rep.f1_log_z) <= 3 * mc.se,
          fmt::format("prediction={:.5f} MC={:.5f}+-{:.2g} gap={:.1f} SE", rep.f1_log_z, mc.log_z, mc.se,
                      std::abs(mc.log_z - rep.f1_log_z) / mc.se));
  // diagnostic only: the sampler agrees with the exact finite-n series
  o.notes.push_back(fmt::format("(diagnostic) exact n=14 series={:.5f}, MC-series={:.1f} SE", exact,
                                std::abs(mc.log_z - exact) / mc.se));
  return o;
}

Outcome ac11c() {
  Outcome o;
  const double alpha = 0.8, beta = 1.0;
  const std::vector<double> hs = {2.5, 1.5, 1.0};
  double sum_sq = 0.0;
  for (double h : hs) sum_sq += h * h;
  const double pred = 0.5 * beta * beta * alpha * alpha * sum_sq;
  for (std::size_t n : {100u, 200u}) {
    NimSpec spec{n, {}};
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const std::size_t a = 3 * i;
      spec.terms.push_back({alpha * hs[i], {a, a + 1, a + 2}});
    }
    const auto np = nim_free_energy_prediction(spec, beta);
    const double scaled = static_cast<double>(n) * nim_log_partition_series(spec, beta).log_z;
    const double rel = std::abs(scaled - pred) / pred;
    o.check(np.all_below && np.p_min == 3 && rel < 0.1,
            fmt::format("n={} n*logZ={:.5f} prediction={:.5f} rel={:.3g} (tol 0.1)", n, scaled, pred, rel));
  }
  return o;
}

SimpleGraph random_graph(std::size_t v, double density, Stream& s) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t a = 0; a < v; ++a)
    for (std::size_t b = a + 1; b < v; ++b)
      if (s.uniform_open() < density) e.emplace_back(a, b);
  return SimpleGraph::from_edges(v, std::move(e));
}

/// Cactus: cycles of length 3..k glued at random existing vertices, plus pendant trees.
SimpleGraph random_cactus(std::size_t blocks, std::size_t k, Stream& s) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  std::size_t v = 1;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t root = s.below(v);
    if (s.coin()) {
      e.emplace_back(root, v++);
      continue;
    }
    const std::size_t len = 3 + s.below(k - 2);
    std::size_t prev = root;
    for (std::size_t j = 1; j < len; ++j) {
      e.emplace_back(prev, v);
      prev = v++;
    }
    e.emplace_back(prev, root);
  }
  return SimpleGraph::from_edges(v, std::move(e));
}

Outcome ac12() {
  Outcome o;
  {
    Stream s(12, 0);
    std::size_t improper = 0;
    for (int g = 0; g < 10000; ++g) {
      const std::size_t v = 1 + s.below(120);
      const auto G = random_graph(v, 0.5 * s.uniform_open() * s.uniform_open(), s);
      const auto rule = g % 2 ? OrderRule::Given : OrderRule::SmallestLast;
      if (!is_proper(G, greedy_color(G, rule))) ++improper;
    }
    o.check(improper == 0, fmt::format("10000 random graphs, improper colorings={}", improper));
  }
  {
    Stream s(12, 1);
    std::size_t checked = 0, over = 0;
    for (std::size_t k = 3; k <= 7; ++k) {
      for (int g = 0; g < 400; ++g) {
        const auto G = g % 2 ? random_cactus(5 + s.below(40), k, s) : random_graph(4 + s.below(9), 0.35 * s.uniform_open(), s);
        const auto longer = has_cycle_longer_than(G, k);
        if (!longer.has_value() || *longer) continue;
        ++checked;
        if (static_cast<std::size_t>(greedy_color(G).color_count) > k + 1) ++over;
      }
    }
    o.check(over == 0 && checked > 1000,
            fmt::format("{} graphs without cycles longer than k (k=3..7): over k+1 colors={}", checked, over));
  }
  {
    MixtureProfile prof;
    prof.alphas = {{2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}};
    const auto law = TailLaw::constant(1.0);
    std::string line = "intersection fraction";
    double prev = 1.0;
    bool dec = true;
    for (std::size_t n : {200u, 400u, 800u}) {
      const auto top = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 0.3)));
      const std::size_t trials = 200;
      std::vector<double> frac(trials);
      parallel_for(trials, workers(), [&](std::size_t t) {
        const auto tensor = sample_model(prof, law, n, top, Stream::derive(12, n, t).engine()());
        frac[t] = build_monomial_graph(tensor, top).intersection_fraction;
      });
      double m = 0.0;
      for (double f : frac) m += f;
      m /= static_cast<double>(trials);
      line += fmt::format(" n={}(top {}):{:.4f}", n, top, m);
      dec = dec && m < prev;
      prev = m;
    }
    o.check(dec, line);
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"01", ac01}, {"02", ac02}, {"03", ac03}, {"04", ac04},   {"05", ac05},   {"06", ac06},   {"07", ac07},
      {"08", ac08}, {"09", ac09}, {"10", ac10}, {"11a", ac11a}, {"11b", ac11b}, {"11c", ac11c}, {"12", ac12}};
  bool all_ok = true, any = false;
  for (const auto& [id, fn] : all) {
    if (!only.empty() && only != id) continue;
    any = true;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& ex) {
      out.check(false, std::string("exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string detail;
    for (const auto& n : out.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << fmt::format("AC{} {}  ({:.1f}s) {}", id, out.pass ? "PASS" : "FAIL", secs, detail) << std::endl;
    all_ok = all_ok && out.pass;
  }
  if (!any) {
    std::cerr << "unknown criterion " << only << "\n";
    return 2;
  }
  return all_ok ? 0 : 1;
}
