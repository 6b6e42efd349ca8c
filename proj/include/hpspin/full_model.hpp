#ifndef HPSPIN_FULL_MODEL_HPP
#define HPSPIN_FULL_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpspin/common.hpp"
#include "hpspin/heavytail_law.hpp"
#include "hpspin/nim_model.hpp"
#include "hpspin/parallel.hpp"
#include "hpspin/phase_functions.hpp"
#include "hpspin/rng.hpp"

namespace hpspin {

// ---------------------------------------------------------------------------
// Mixture profile

struct MixtureProfile {
  std::map<int, double> alphas;  // p -> alpha(p) >= 0
  double beta = 1.0;
  double growth_margin = 0.1;  // eps with sum alpha(p) (1+eps)^p < inf; trivial on a finite support

  double alpha(int p) const {
    const auto it = alphas.find(p);
    return it == alphas.end() ? 0.0 : it->second;
  }

  std::vector<int> support() const {
    std::vector<int> s;
    for (const auto& [p, a] : alphas)
      if (a > 0.0) s.push_back(p);
    return s;
  }

  double growth_sum() const {
    double s = 0.0;
    for (const auto& [p, a] : alphas) s += a * std::pow(1.0 + growth_margin, p);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Couplings

/// All retained couplings of one order p, sorted by |H| descending.
/// Index set of coupling r is indices[r*p .. r*p+p).
struct OrderBlock {
  int p = 2;
  bool exact = true;  // every one of the C(n,p) couplings is stored
  double log_count = 0.0;  // log C(n,p)
  double log_b = 0.0;      // log b_{n,p}
  std::vector<double> values;  // normalized H_{I,p}
  std::vector<std::uint32_t> indices;
  std::size_t K = 0;  // retention count used for the bulk summary
  double bulk_sum_sq = 0.0;  // sum of H^2 over ranks > K
  double bulk_count = 0.0;

  std::size_t size() const { return values.size(); }
  std::span<const std::uint32_t> index_set(std::size_t r) const {
    return {indices.data() + r * static_cast<std::size_t>(p), static_cast<std::size_t>(p)};
  }
};

struct CouplingTensor {
  std::size_t n = 0;
  std::vector<OrderBlock> blocks;  // ascending p
  std::vector<std::string> notices;

  const OrderBlock* block(int p) const {
    for (const auto& b : blocks)
      if (b.p == p) return &b;
    return nullptr;
  }

  struct Planted {
    int p = 2;
    std::vector<std::uint32_t> indices;
    double h = 0.0;  // already normalized
  };

  /// Tensor holding exactly the given couplings (no bulk).
  static CouplingTensor planted(std::size_t n, const std::vector<Planted>& terms);
};

inline void sort_block(OrderBlock& b) {
  const auto p = static_cast<std::size_t>(b.p);
  std::vector<std::size_t> order(b.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return std::abs(b.values[a]) > std::abs(b.values[c]); });
  std::vector<double> v(b.values.size());
  std::vector<std::uint32_t> idx(b.indices.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    v[r] = b.values[order[r]];
    std::copy_n(b.indices.begin() + static_cast<std::ptrdiff_t>(order[r] * p), p,
                idx.begin() + static_cast<std::ptrdiff_t>(r * p));
  }
  b.values = std::move(v);
  b.indices = std::move(idx);
}

inline CouplingTensor CouplingTensor::planted(std::size_t n, const std::vector<Planted>& terms) {
  CouplingTensor t;
  t.n = n;
  std::map<int, OrderBlock> by_p;
  for (const auto& term : terms) {
    if (term.p < 2 || term.indices.size() != static_cast<std::size_t>(term.p)) {
      throw std::invalid_argument("planted coupling: index count must equal p >= 2");
    }
    for (auto i : term.indices)
      if (i >= n) throw std::invalid_argument("planted coupling: index out of range");
    auto& b = by_p[term.p];
    b.p = term.p;
    b.exact = false;
    b.values.push_back(term.h);
    b.indices.insert(b.indices.end(), term.indices.begin(), term.indices.end());
  }
  for (auto& [p, b] : by_p) {
    sort_block(b);
    b.K = b.values.size();
    b.log_count = log_binomial(n, static_cast<std::size_t>(p));
    t.blocks.push_back(std::move(b));
  }
  return t;
}

inline constexpr double kExactModeLimit = 1e6;

/// Lexicographic successor of a p-combination of {0..n-1}; false at the end.
inline bool next_combination(std::vector<std::uint32_t>& c, std::size_t n) {
  const std::size_t p = c.size();
  for (std::size_t i = p; i-- > 0;) {
    if (c[i] < n - p + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < p; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

/// Uniform random p-subset of {0..n-1}, sorted (Floyd's algorithm).
inline std::vector<std::uint32_t> random_subset(std::size_t n, int p, Stream& stream) {
  std::set<std::uint32_t> chosen;
  for (std::size_t j = n - static_cast<std::size_t>(p); j < n; ++j) {
    const auto r = static_cast<std::uint32_t>(stream.below(j + 1));
    if (!chosen.insert(r).second) chosen.insert(static_cast<std::uint32_t>(j));
  }
  return {chosen.begin(), chosen.end()};
}

/// Draw the couplings of every order in the profile support and normalize by b_{n,p}.
///
/// Exact mode (C(n,p) <= 1e6) draws and stores every coupling. Streamed mode keeps
/// the top K order statistics, generated as inverse-tail images of the smallest
/// uniforms via exponential spacings; their index sets are distinct uniform
/// p-subsets. The bulk sum of H^2 over ranks > K is exact up to rank
/// max(10K, 1000) and a conditional expectation beyond it.
inline CouplingTensor sample_model(const MixtureProfile& profile, const TailLaw& law, std::size_t n,
                                   std::size_t K, std::uint64_t master_seed) {
  if (K < 1) throw std::invalid_argument("sample_model: K must be >= 1");
  const auto support = profile.support();
  if (support.empty()) throw std::invalid_argument("sample_model: no interactions");
  if (n < static_cast<std::size_t>(support.back())) throw std::invalid_argument("sample_model: n < max p");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("sample_model: n too large");
  CouplingTensor t;
  t.n = n;
  for (int p : support) {
    OrderBlock b;
    b.p = p;
    const auto up = static_cast<std::size_t>(p);
    const unsigned long long exact_count = binomial_u64(n, up);
    b.log_count = exact_count != 0 ? std::log(static_cast<double>(exact_count)) : log_binomial(n, up);
    b.log_b = log_quantile_b(law, n, up);
    const double count = std::exp(b.log_count);
    Stream stream = Stream::derive(master_seed, static_cast<std::uint64_t>(p), 0);
    std::size_t keep = K;
    if (static_cast<double>(K) > count) {
      keep = static_cast<std::size_t>(std::llround(count));
      t.notices.push_back("K clamped to C(n," + std::to_string(p) + ") = " + std::to_string(keep));
    }
    b.K = keep;
    if (exact_count != 0 && static_cast<double>(exact_count) <= kExactModeLimit) {
      b.exact = true;
      const auto raw = sample(law, stream, static_cast<std::size_t>(exact_count));
      b.values.resize(raw.size());
      b.indices.reserve(raw.size() * up);
      std::vector<std::uint32_t> comb(up);
      std::iota(comb.begin(), comb.end(), 0u);
      std::size_t r = 0;
      do {
        b.values[r] = std::copysign(std::exp(std::log(std::abs(raw[r])) - b.log_b), raw[r]);
        b.indices.insert(b.indices.end(), comb.begin(), comb.end());
        ++r;
      } while (next_combination(comb, n));
      sort_block(b);
      for (std::size_t i = keep; i < b.values.size(); ++i) b.bulk_sum_sq += b.values[i] * b.values[i];
      b.bulk_count = static_cast<double>(b.values.size() - keep);
    } else {
      b.exact = false;
      const std::size_t ranks = static_cast<std::size_t>(
          std::min(count, static_cast<double>(std::max<std::size_t>(10 * keep, 1000))));
      std::set<std::vector<std::uint32_t>> used;
      double spacing = 0.0;  // S_k = sum_j E_j / (N - j + 1)
      double last_log_h = 0.0;
      for (std::size_t k = 1; k <= ranks; ++k) {
        spacing += stream.exponential() / (count - static_cast<double>(k) + 1.0);
        const double log_u = std::log(-std::expm1(-spacing));
        last_log_h = log_inverse_tail(law, log_u);
        const double mag = std::exp(last_log_h - b.log_b);
        if (k <= keep) {
          const double v = stream.coin() ? mag : -mag;
          std::vector<std::uint32_t> set;
          do {
            set = random_subset(n, p, stream);
          } while (!used.insert(set).second);
          b.values.push_back(v);
          b.indices.insert(b.indices.end(), set.begin(), set.end());
        } else {
          b.bulk_sum_sq += mag * mag;
        }
      }
      const double rest = count - static_cast<double>(ranks);
      if (rest > 0.0) {
        const double h = std::exp(last_log_h);
        const double below = 1.0 - tail_prob(law, std::max(h, law.t_floor()));
        if (below > 0.0) {
          const double m2 = truncated_second_moment(law, h) / below;
          b.bulk_sum_sq += rest * m2 * std::exp(-2.0 * b.log_b);
        }
      }
      b.bulk_count = count - static_cast<double>(keep);
    }
    t.blocks.push_back(std::move(b));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Analytic ground state energy

struct GseAnalytic {
  double value = 0.0;
  int p = 0;
  double h = 0.0;
  std::vector<std::uint32_t> indices;
  std::vector<double> pattern;  // coordinates on `indices`: magnitude sqrt(n/p), signs matching sign(H)
};

/// max over stored couplings of |alpha(p) H_{I,p}| p^{-p/2}; beta multiplies only when include_beta.
inline GseAnalytic gse_analytic(const CouplingTensor& tensor, const MixtureProfile& profile,
                                bool include_beta = false) {
  GseAnalytic g;
  const double scale = include_beta ? profile.beta : 1.0;
  for (const auto& b : tensor.blocks) {
    if (b.values.empty()) continue;
    const double a = profile.alpha(b.p);
    const double v = std::abs(scale * a * b.values[0]) * std::pow(static_cast<double>(b.p), -0.5 * b.p);
    if (v > g.value) {
      g.value = v;
      g.p = b.p;
      g.h = b.values[0];
      const auto set = b.index_set(0);
      g.indices.assign(set.begin(), set.end());
    }
  }
  if (g.p != 0) {
    const double mag = std::sqrt(static_cast<double>(tensor.n) / g.p);
    const double sgn = std::copysign(1.0, g.h * profile.alpha(g.p));
    g.pattern.assign(static_cast<std::size_t>(g.p), mag);
    g.pattern[0] *= sgn;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Regime classification

enum class RegimeKind { F1, Fdom, Critical, MDTie };

inline const char* to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::F1: return "F1";
    case RegimeKind::Fdom: return "Fdom";
    case RegimeKind::Critical: return "Critical";
    case RegimeKind::MDTie: return "MDTie";
  }
  return "?";
}

struct OrderSummary {
  int p = 0;
  double alpha = 0.0;
  double h1 = 0.0;     // largest normalized coupling (signed)
  double h_eff = 0.0;  // beta alpha(p) h1
  double h_star = 0.0;
  double threshold_gap = 0.0;  // |h_eff| / h_star - 1
  double f = 0.0;
};

struct RegimeReport {
  RegimeKind kind = RegimeKind::F1;
  double guard = 0.0;
  std::vector<OrderSummary> orders;
  int p_dom = 0;
  double h_dom = 0.0;  // h_eff of the dominant coupling
  std::vector<std::uint32_t> dom_indices;
  double f_margin = 0.0;  // best f minus runner-up f

  // Fdom predictions
  double free_energy = 0.0;
  std::optional<GeometryPrediction> geometry;
  // F1 predictions
  int p_min = 0;
  double f1_log_z = 0.0;          // p_min = 2: -sum 1/2 log(1 - (beta alpha H)^2) over stored 2-spin couplings
  bool f1_vanishing_scale = false;  // p_min >= 3: log Z = O(n^{-eps})
  double fluctuation_limit = 0.0; // p_min >= 3: predicted limit of n^{p_min-2} log Z
  GseAnalytic gse;
};

/// guard < 0 selects the default 10/n. F1 needs every |h_eff| < H_p^* (1 - guard);
/// Fdom needs f of the top order to beat every other order by more than guard.
inline RegimeReport classify_regime(const CouplingTensor& tensor, const MixtureProfile& profile,
                                    double guard = -1.0) {
  RegimeReport r;
  r.guard = guard < 0.0 ? 10.0 / static_cast<double>(tensor.n) : guard;
  bool any_above = false, any_band = false;
  for (const auto& b : tensor.blocks) {
    const double a = profile.alpha(b.p);
    if (a <= 0.0 || b.values.empty()) continue;
    OrderSummary s;
    s.p = b.p;
    s.alpha = a;
    s.h1 = b.values[0];
    s.h_eff = profile.beta * a * s.h1;
    s.h_star = h_star(b.p);
    s.threshold_gap = std::abs(s.h_eff) / s.h_star - 1.0;
    s.f = f_p(b.p, s.h_eff);
    if (std::abs(s.h_eff) > s.h_star * (1.0 + r.guard)) any_above = true;
    else if (!(std::abs(s.h_eff) < s.h_star * (1.0 - r.guard))) any_band = true;
    r.p_min = r.p_min == 0 ? b.p : std::min(r.p_min, b.p);
    r.orders.push_back(s);
  }
  r.gse = gse_analytic(tensor, profile);
  if (any_above) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.orders.size(); ++i)
      if (r.orders[i].f > r.orders[best].f) best = i;
    double second = 0.0;
    for (std::size_t i = 0; i < r.orders.size(); ++i)
      if (i != best) second = std::max(second, r.orders[i].f);
    r.f_margin = r.orders[best].f - second;
    if (r.f_margin > r.guard) {
      const auto& s = r.orders[best];
      r.kind = RegimeKind::Fdom;
      r.p_dom = s.p;
      r.h_dom = s.h_eff;
      const auto set = tensor.block(s.p)->index_set(0);
      r.dom_indices.assign(set.begin(), set.end());
      r.free_energy = s.f;
      NimSpec single{tensor.n, {NimTerm{s.h_eff, {set.begin(), set.end()}}}};
      r.geometry = geometry_prediction(single, 1.0);
    } else {
      r.kind = RegimeKind::MDTie;
    }
    return r;
  }
  if (any_band) {
    r.kind = RegimeKind::Critical;
    return r;
  }
  r.kind = RegimeKind::F1;
  if (r.p_min == 2) {
    const auto* b = tensor.block(2);
    const double c = profile.beta * profile.alpha(2);
    for (double h : b->values) r.f1_log_z += -0.5 * std::log1p(-(c * h) * (c * h));
  } else if (r.p_min >= 3) {
    r.f1_vanishing_scale = true;
    const auto* b = tensor.block(r.p_min);
    const double c = profile.beta * profile.alpha(r.p_min);
    double s = b->bulk_sum_sq;
    for (double h : b->values) s += h * h;
    r.fluctuation_limit = 0.5 * c * c * s;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Graphs and coloring

/// Undirected simple graph in compressed sparse row form.
struct SimpleGraph {
  std::size_t vertex_count = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> adjacency;

  static SimpleGraph from_edges(std::size_t v, std::vector<std::pair<std::size_t, std::size_t>> edges) {
    for (auto& e : edges) {
      if (e.first == e.second || e.first >= v || e.second >= v) throw std::invalid_argument("bad edge");
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    SimpleGraph g;
    g.vertex_count = v;
    std::vector<std::size_t> deg(v, 0);
    for (const auto& [a, b] : edges) ++deg[a], ++deg[b];
    g.offsets.assign(v + 1, 0);
    for (std::size_t i = 0; i < v; ++i) g.offsets[i + 1] = g.offsets[i] + deg[i];
    g.adjacency.resize(g.offsets[v]);
    std::vector<std::size_t> fill(g.offsets.begin(), g.offsets.end() - 1);
    for (const auto& [a, b] : edges) {
      g.adjacency[fill[a]++] = b;
      g.adjacency[fill[b]++] = a;
    }
    return g;
  }

  std::span<const std::size_t> neighbors(std::size_t v) const {
    return {adjacency.data() + offsets[v], offsets[v + 1] - offsets[v]};
  }
  std::size_t degree(std::size_t v) const { return offsets[v + 1] - offsets[v]; }
  std::size_t edge_count() const { return adjacency.size() / 2; }
};

struct MonomialGraph {
  SimpleGraph graph;
  std::vector<std::vector<std::uint32_t>> vertices;  // index sets
  std::vector<int> orders;
  std::size_t edge_count = 0;
  double intersection_fraction = 0.0;  // edges / C(V,2)
};

/// Intersection graph of the top `top_count` index sets of every order.
inline MonomialGraph build_monomial_graph(const CouplingTensor& tensor, std::size_t top_count) {
  MonomialGraph mg;
  for (const auto& b : tensor.blocks) {
    if (top_count > b.size()) throw std::invalid_argument("build_monomial_graph: top_count exceeds stored couplings");
    for (std::size_t r = 0; r < top_count; ++r) {
      const auto set = b.index_set(r);
      mg.vertices.emplace_back(set.begin(), set.end());
      mg.orders.push_back(b.p);
    }
  }
  std::map<std::uint32_t, std::vector<std::size_t>> owners;
  for (std::size_t v = 0; v < mg.vertices.size(); ++v)
    for (auto i : mg.vertices[v]) owners[i].push_back(v);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [idx, list] : owners)
    for (std::size_t a = 0; a < list.size(); ++a)
      for (std::size_t b = a + 1; b < list.size(); ++b) edges.emplace_back(list[a], list[b]);
  mg.graph = SimpleGraph::from_edges(mg.vertices.size(), std::move(edges));
  mg.edge_count = mg.graph.edge_count();
  const double v = static_cast<double>(mg.vertices.size());
  mg.intersection_fraction = v >= 2 ? static_cast<double>(mg.edge_count) / (0.5 * v * (v - 1.0)) : 0.0;
  return mg;
}

enum class OrderRule { SmallestLast, Given };

struct Coloring {
  std::vector<int> colors;
  int color_count = 0;
};

/// Smallest-last vertex order (repeatedly remove a minimum-degree vertex), returned
/// in coloring order, i.e. reverse removal order.
inline std::vector<std::size_t> smallest_last_order(const SimpleGraph& g) {
  const std::size_t n = g.vertex_count;
  std::vector<std::size_t> deg(n);
  std::size_t max_deg = 0;
  for (std::size_t v = 0; v < n; ++v) max_deg = std::max(max_deg, deg[v] = g.degree(v));
  std::vector<std::vector<std::size_t>> buckets(max_deg + 1);
  for (std::size_t v = 0; v < n; ++v) buckets[deg[v]].push_back(v);
  std::vector<char> removed(n, 0);
  std::vector<std::size_t> removal;
  removal.reserve(n);
  std::size_t low = 0;
  while (removal.size() < n) {
    low = low > 0 ? low - 1 : 0;
    while (buckets[low].empty()) ++low;
    const std::size_t v = buckets[low].back();
    buckets[low].pop_back();
    if (removed[v] || deg[v] != low) continue;  // stale entry
    removed[v] = 1;
    removal.push_back(v);
    for (std::size_t w : g.neighbors(v)) {
      if (removed[w]) continue;
      --deg[w];
      buckets[deg[w]].push_back(w);
    }
  }
  std::reverse(removal.begin(), removal.end());
  return removal;
}

/// Greedy first-fit coloring along the chosen vertex order.
inline Coloring greedy_color(const SimpleGraph& g, OrderRule rule = OrderRule::SmallestLast,
                             std::vector<std::size_t> given = {}) {
  std::vector<std::size_t> order;
  if (rule == OrderRule::SmallestLast) {
    order = smallest_last_order(g);
  } else {
    if (given.empty()) {
      order.resize(g.vertex_count);
      std::iota(order.begin(), order.end(), 0);
    } else {
      order = std::move(given);
    }
    if (order.size() != g.vertex_count) throw std::invalid_argument("greedy_color: order must list every vertex");
  }
  Coloring c;
  c.colors.assign(g.vertex_count, -1);
  std::vector<char> used;
  for (std::size_t v : order) {
    used.assign(g.degree(v) + 1, 0);
    for (std::size_t w : g.neighbors(v)) {
      const int cw = c.colors[w];
      if (cw >= 0 && static_cast<std::size_t>(cw) < used.size()) used[static_cast<std::size_t>(cw)] = 1;
    }
    int col = 0;
    while (used[static_cast<std::size_t>(col)]) ++col;
    c.colors[v] = col;
    c.color_count = std::max(c.color_count, col + 1);
  }
  return c;
}

inline bool is_proper(const SimpleGraph& g, const Coloring& c) {
  for (std::size_t v = 0; v < g.vertex_count; ++v) {
    if (c.colors[v] < 0) return false;
    for (std::size_t w : g.neighbors(v))
      if (c.colors[v] == c.colors[w]) return false;
  }
  return true;
}

/// Whether the graph has a simple cycle longer than k, by exhaustive path search
/// rooted at each cycle's smallest vertex. nullopt when |V| > 2000 or the search
/// exceeds `budget` expanded paths.
inline std::optional<bool> has_cycle_longer_than(const SimpleGraph& g, std::size_t k,
                                                 std::size_t budget = 50'000'000) {
  if (g.vertex_count > 2000) return std::nullopt;
  std::vector<char> on_path(g.vertex_count, 0);
  std::size_t expanded = 0;
  bool found = false, exhausted = false;
  std::function<void(std::size_t, std::size_t, std::size_t)> dfs = [&](std::size_t s, std::size_t v,
                                                                       std::size_t len) {
    if (found || exhausted) return;
    if (++expanded > budget) {
      exhausted = true;
      return;
    }
    for (std::size_t w : g.neighbors(v)) {
      if (w == s && len >= 3 && len > k) {
        found = true;
        return;
      }
      if (w <= s || on_path[w]) continue;
      on_path[w] = 1;
      dfs(s, w, len + 1);
      on_path[w] = 0;
      if (found || exhausted) return;
    }
  };
  for (std::size_t s = 0; s < g.vertex_count && !found && !exhausted; ++s) {
    on_path[s] = 1;
    dfs(s, s, 1);
    on_path[s] = 0;
  }
  if (exhausted) return std::nullopt;
  return found;
}

// ---------------------------------------------------------------------------
// Limiting regime probabilities

struct RegimeProbabilities {
  std::size_t trials = 0;
  std::size_t f1_count = 0;
  std::map<int, std::size_t> dom_count;
  double p1 = 0.0;
  double p1_se = 0.0;
  std::map<int, double> p_t;
};

/// Monte Carlo over i.i.d. Frechet(law_alpha) maxima X_p, one stream per trial.
inline RegimeProbabilities regime_probabilities(const MixtureProfile& profile, double law_alpha,
                                                std::size_t trials, std::uint64_t seed,
                                                std::size_t workers = 1) {
  if (trials < 1) throw std::invalid_argument("regime_probabilities: trials must be >= 1");
  const auto support = profile.support();
  std::vector<double> thresholds;
  for (int p : support) thresholds.push_back(h_star(p));
  std::vector<int> outcome(trials, 0);  // 0 = F1, otherwise dominant p
  parallel_for(trials, workers, [&](std::size_t trial) {
    Stream s = Stream::derive(seed, 0x7265u, trial);
    bool above = false;
    double best_f = -1.0;
    int best_p = 0;
    for (std::size_t j = 0; j < support.size(); ++j) {
      const double h = profile.beta * profile.alpha(support[j]) * frechet_draw(s, law_alpha);
      if (h >= thresholds[j]) {
        above = true;
        const double f = f_p_certified(support[j], h, thresholds[j]).value;
        if (f > best_f) {
          best_f = f;
          best_p = support[j];
        }
      }
    }
    outcome[trial] = above ? best_p : 0;
  });
  RegimeProbabilities r;
  r.trials = trials;
  for (int p : support) r.dom_count[p] = 0;
  for (int o : outcome) (o == 0 ? r.f1_count : r.dom_count[o])++;
  const double dt = static_cast<double>(trials);
  r.p1 = static_cast<double>(r.f1_count) / dt;
  r.p1_se = std::sqrt(std::max(r.p1 * (1.0 - r.p1), 1.0 / dt) / dt);
  for (const auto& [p, c] : r.dom_count) r.p_t[p] = static_cast<double>(c) / dt;
  return r;
}

/// Frechet CDF by Simpson quadrature of the density alpha x^{-alpha-1} exp(-x^{-alpha})
/// in log x; an independent check on the closed form.
inline double frechet_cdf_quadrature(double x, double alpha, int intervals = 4000) {
  if (x <= 0.0) return 0.0;
  const double a = std::log(x) - 60.0 / alpha, b = std::log(x);
  const double step = (b - a) / intervals;
  auto dens = [&](double u) {
    const double z = std::exp(-alpha * u);
    return alpha * z * std::exp(-z);
  };
  double s = dens(a) + dens(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * dens(a + i * step);
  return s * step / 3.0;
}

/// Limit of P(F_1): prod_p P(|beta alpha(p) X_p| < H_p^*), each factor by quadrature.
inline double p1_product_quadrature(const MixtureProfile& profile, double law_alpha) {
  double prod = 1.0;
  for (int p : profile.support())
    prod *= frechet_cdf_quadrature(h_star(p) / (profile.beta * profile.alpha(p)), law_alpha);
  return prod;
}

struct TuneResult {
  MixtureProfile profile;
  std::map<int, double> achieved;
  double achieved_p1 = 0.0;
  double max_error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Coordinate-wise log-bisection on alpha(t) toward p_t = a_t, using common random
/// numbers (one fixed seed) for every evaluation. Stops at tolerance or budget.
inline TuneResult tune_profile(const std::map<int, double>& targets, double law_alpha, double beta,
                               double tolerance, std::size_t budget, std::size_t trials,
                               std::uint64_t seed, std::size_t workers = 1) {
  double total = 0.0;
  for (const auto& [p, a] : targets) {
    if (p < 2 || a < 0.0) throw std::invalid_argument("tune_profile: invalid target");
    total += a;
  }
  if (total > 1.0 + 1e-12) throw std::invalid_argument("tune_profile: targets sum above 1");
  TuneResult res;
  res.profile.beta = beta;
  for (const auto& [p, a] : targets) res.profile.alphas[p] = 1.0;
  auto evaluate = [&](const MixtureProfile& prof) {
    ++res.evaluations;
    return regime_probabilities(prof, law_alpha, trials, seed, workers);
  };
  auto error_of = [&](const RegimeProbabilities& rp) {
    double e = 0.0;
    for (const auto& [p, a] : targets) e = std::max(e, std::abs(rp.p_t.at(p) - a));
    return e;
  };
  const double log_lo = std::log(1e-4), log_hi = std::log(1e4);
  auto current = evaluate(res.profile);
  res.max_error = error_of(current);
  while (res.max_error >= tolerance && res.evaluations < budget) {
    const std::size_t before = res.evaluations;
    for (const auto& [t, a] : targets) {
      if (res.evaluations >= budget) break;
      double lo = log_lo, hi = log_hi;
      // p_t increases with alpha(t)
      for (int it = 0; it < 30 && res.evaluations < budget; ++it) {
        const double mid = 0.5 * (lo + hi);
        MixtureProfile trial = res.profile;
        trial.alphas[t] = std::exp(mid);
        const auto rp = evaluate(trial);
        (rp.p_t.at(t) < a ? lo : hi) = mid;
        if (std::abs(rp.p_t.at(t) - a) < 0.25 * tolerance) {
          lo = hi = mid;
          break;
        }
      }
      res.profile.alphas[t] = std::exp(0.5 * (lo + hi));
    }
    current = evaluate(res.profile);
    res.max_error = error_of(current);
    if (res.evaluations == before) break;
  }
  res.achieved = current.p_t;
  res.achieved_p1 = current.p1;
  res.converged = res.max_error < tolerance;
  return res;
}

// ---------------------------------------------------------------------------
// Tail-part magnitude diagnostics

struct TailDiagnostic {
  int p = 0;
  double bulk_sum_sq = 0.0;
  double bound = 0.0;  // alpha(p) n sqrt(bulk sum H^2)
  double ratio = 0.0;  // bound / n
  bool flagged = false;  // ratio > n^{-eps}
};

inline std::vector<TailDiagnostic> tail_part_diagnostics(const CouplingTensor& tensor,
                                                         const MixtureProfile& profile, double eps) {
  std::vector<TailDiagnostic> out;
  const double dn = static_cast<double>(tensor.n);
  for (const auto& b : tensor.blocks) {
    TailDiagnostic d;
    d.p = b.p;
    d.bulk_sum_sq = b.bulk_sum_sq;
    d.bound = profile.alpha(b.p) * dn * std::sqrt(b.bulk_sum_sq);
    d.ratio = d.bound / dn;
    d.flagged = d.ratio > std::pow(dn, -eps);
    out.push_back(d);
  }
  return out;
}

}  // namespace hpspin

#endif
