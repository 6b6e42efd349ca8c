#include <gtest/gtest.h>

#include <cmath>

#include "hpspin/full_model.hpp"

using namespace hpspin;

namespace {

MixtureProfile single(int p, double a = 1.0, double beta = 1.0) {
  MixtureProfile m;
  m.alphas[p] = a;
  m.beta = beta;
  return m;
}

CouplingTensor one(std::size_t n, int p, double h, std::vector<std::uint32_t> idx) {
  return CouplingTensor::planted(n, {{p, std::move(idx), h}});
}

}  // namespace

TEST(SampleModel, ExactModeCountAndOrder) {
  const auto t = sample_model(single(2), TailLaw::constant(1.0), 6, 4, 1);
  ASSERT_EQ(t.blocks.size(), 1u);
  const auto& b = t.blocks[0];
  EXPECT_TRUE(b.exact);
  EXPECT_EQ(b.size(), 15u);
  for (std::size_t r = 1; r < b.size(); ++r) EXPECT_GE(std::abs(b.values[r - 1]), std::abs(b.values[r]));
  std::set<std::vector<std::uint32_t>> sets;
  for (std::size_t r = 0; r < b.size(); ++r) {
    const auto s = b.index_set(r);
    EXPECT_LT(s[0], s[1]);
    sets.insert({s.begin(), s.end()});
  }
  EXPECT_EQ(sets.size(), 15u);
  double bulk = 0.0;
  for (std::size_t r = 4; r < 15; ++r) bulk += b.values[r] * b.values[r];
  EXPECT_NEAR(b.bulk_sum_sq, bulk, 1e-12);
}

TEST(SampleModel, Deterministic) {
  MixtureProfile m;
  m.alphas = {{2, 1.0}, {3, 0.5}};
  const auto a = sample_model(m, TailLaw::polylog(1.0, 1.0), 30, 5, 99);
  const auto b = sample_model(m, TailLaw::polylog(1.0, 1.0), 30, 5, 99);
  ASSERT_EQ(a.blocks.size(), b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    EXPECT_EQ(a.blocks[i].values, b.blocks[i].values);
    EXPECT_EQ(a.blocks[i].indices, b.blocks[i].indices);
  }
}

TEST(SampleModel, StreamedModeShape) {
  const auto t = sample_model(single(4), TailLaw::constant(1.2), 400, 6, 3);
  const auto& b = t.blocks[0];
  EXPECT_FALSE(b.exact);
  EXPECT_EQ(b.size(), 6u);
  for (std::size_t r = 1; r < b.size(); ++r) EXPECT_GE(std::abs(b.values[r - 1]), std::abs(b.values[r]));
  EXPECT_GT(b.bulk_sum_sq, 0.0);
  std::set<std::vector<std::uint32_t>> sets;
  for (std::size_t r = 0; r < b.size(); ++r) sets.insert({b.index_set(r).begin(), b.index_set(r).end()});
  EXPECT_EQ(sets.size(), 6u);
}

TEST(SampleModel, StreamedTopIsFrechet) {
  // exact mode first, then streamed mode
  std::vector<double> m(2000);
  const auto law = TailLaw::constant(1.0);
  for (std::size_t t = 0; t < m.size(); ++t) {
    const auto s = sample_model(single(7), law, 12, 1, 1000 + t);  // C(12,7)=792, exact
    m[t] = std::abs(s.blocks[0].values[0]);
  }
  EXPECT_LT(frechet_gof(m, 1.0), 0.05);
  for (std::size_t t = 0; t < m.size(); ++t) {
    const auto s = sample_model(single(3), law, 500, 1, 5000 + t);  // streamed
    m[t] = std::abs(s.blocks[0].values[0]);
  }
  EXPECT_LT(frechet_gof(m, 1.0), 0.05);
}

TEST(SampleModel, ClampsK) {
  const auto t = sample_model(single(3), TailLaw::constant(1.0), 5, 50, 1);
  EXPECT_EQ(t.blocks[0].K, 10u);
  EXPECT_FALSE(t.notices.empty());
}

TEST(SampleModel, NoInteractions) {
  EXPECT_THROW(sample_model(MixtureProfile{}, TailLaw::constant(1.0), 10, 1, 1), std::invalid_argument);
}

TEST(Regime, PlantedFdom) {
  const auto prof = single(3, 0.8, 1.2);
  const double h = 2 * h_star(3) / (1.2 * 0.8);
  const auto t = CouplingTensor::planted(100, {{3, {4, 9, 20}, h}, {3, {1, 2, 3}, 0.01}});
  const auto r = classify_regime(t, prof);
  EXPECT_EQ(r.kind, RegimeKind::Fdom);
  EXPECT_EQ(r.p_dom, 3);
  EXPECT_EQ(r.dom_indices, (std::vector<std::uint32_t>{4, 9, 20}));
  EXPECT_NEAR(r.free_energy, f_p(3, 2 * h_star(3)), 1e-12);
  ASSERT_TRUE(r.geometry.has_value());
}

TEST(Regime, AllSmallIsF1) {
  MixtureProfile prof;
  prof.alphas = {{2, 1.0}, {3, 1.0}};
  const auto t = CouplingTensor::planted(50, {{2, {0, 1}, 0.1}, {3, {2, 3, 4}, 0.1 * h_star(3)}});
  const auto r = classify_regime(t, prof);
  EXPECT_EQ(r.kind, RegimeKind::F1);
  EXPECT_EQ(r.p_min, 2);
  EXPECT_NEAR(r.f1_log_z, -0.5 * std::log(1 - 0.01), 1e-12);
}

TEST(Regime, EqualFIsTie) {
  const auto t = CouplingTensor::planted(50, {{2, {0, 1}, 3.0}, {2, {2, 3}, -3.0}});
  // only the top coupling of each order competes, so use two orders with equal f
  MixtureProfile prof;
  prof.alphas = {{2, 1.0}, {3, 1.0}};
  const double f2 = f_p(2, 3.0);
  double lo = h_star(3), hi = 10 * h_star(3);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f_p(3, mid) < f2 ? lo : hi) = mid;
  }
  const auto t2 = CouplingTensor::planted(50, {{2, {0, 1}, 3.0}, {3, {2, 3, 4}, 0.5 * (lo + hi)}});
  EXPECT_EQ(classify_regime(t2, prof).kind, RegimeKind::MDTie);
  (void)t;
}

TEST(Regime, CriticalBand) {
  const auto t = one(50, 3, h_star(3) * (1 + 1e-4), {0, 1, 2});
  EXPECT_EQ(classify_regime(t, single(3)).kind, RegimeKind::Critical);
}

TEST(Gse, AnalyticExamples) {
  EXPECT_NEAR(gse_analytic(one(10, 2, 4.0, {0, 1}), single(2)).value, 2.0, 1e-12);
  EXPECT_NEAR(gse_analytic(one(10, 3, 9.0, {0, 1, 2}), single(3)).value, 9 * std::pow(3.0, -1.5), 1e-12);
  EXPECT_NEAR(gse_analytic(one(10, 3, 9.0, {0, 1, 2}), single(3)).value, 1.7321, 1e-4);
  EXPECT_EQ(gse_analytic(CouplingTensor{}, single(2)).value, 0.0);
}

TEST(Gse, BetaOnlyWhenAsked) {
  const auto t = one(10, 2, 4.0, {0, 1});
  EXPECT_NEAR(gse_analytic(t, single(2, 1.0, 3.0)).value, 2.0, 1e-12);
  EXPECT_NEAR(gse_analytic(t, single(2, 1.0, 3.0), true).value, 6.0, 1e-12);
}

TEST(MonomialGraph, DisjointAndShared) {
  const auto d = CouplingTensor::planted(20, {{3, {0, 1, 2}, 2.0}, {3, {3, 4, 5}, 1.0}});
  EXPECT_EQ(build_monomial_graph(d, 2).edge_count, 0u);
  const auto s = CouplingTensor::planted(20, {{3, {0, 1, 2}, 2.0}, {3, {2, 4, 5}, 1.0}});
  const auto g = build_monomial_graph(s, 2);
  EXPECT_EQ(g.edge_count, 1u);
  EXPECT_DOUBLE_EQ(g.intersection_fraction, 1.0);
}

TEST(Coloring, SmallGraphs) {
  const auto empty = SimpleGraph::from_edges(5, {});
  EXPECT_EQ(greedy_color(empty).color_count, 1);
  const auto edge = SimpleGraph::from_edges(2, {{0, 1}});
  EXPECT_EQ(greedy_color(edge).color_count, 2);
  const auto c5 = SimpleGraph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
  const auto c = greedy_color(c5, OrderRule::SmallestLast);
  EXPECT_EQ(c.color_count, 3);
  EXPECT_TRUE(is_proper(c5, c));
}

TEST(Coloring, GivenOrder) {
  const auto path = SimpleGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  const auto c = greedy_color(path, OrderRule::Given, {0, 3, 1, 2});
  EXPECT_TRUE(is_proper(path, c));
  EXPECT_EQ(c.color_count, 3);
}

TEST(Cycles, LongCycleDetection) {
  const auto c5 = SimpleGraph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
  EXPECT_EQ(has_cycle_longer_than(c5, 4, 100000), std::optional<bool>(true));
  EXPECT_EQ(has_cycle_longer_than(c5, 5, 100000), std::optional<bool>(false));
  const auto tree = SimpleGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
  EXPECT_EQ(has_cycle_longer_than(tree, 2, 100000), std::optional<bool>(false));
}

TEST(RegimeProbabilities, Extremes) {
  const auto tiny = regime_probabilities(single(2, 1e-6), 1.0, 2000, 1);
  EXPECT_GT(tiny.p1, 0.99);
  const auto huge = regime_probabilities(single(2, 1e6), 1.0, 2000, 1);
  EXPECT_GT(huge.p_t.at(2), 0.99);
}

TEST(RegimeProbabilities, WorkerIndependent) {
  MixtureProfile m;
  m.alphas = {{2, 0.7}, {3, 2.0}, {4, 5.0}};
  const auto a = regime_probabilities(m, 1.3, 3000, 5, 1);
  const auto b = regime_probabilities(m, 1.3, 3000, 5, 4);
  EXPECT_EQ(a.f1_count, b.f1_count);
  EXPECT_EQ(a.dom_count, b.dom_count);
}

TEST(RegimeProbabilities, QuadratureProduct) {
  MixtureProfile m;
  m.alphas = {{2, 0.5}, {3, 1.5}};
  const auto rp = regime_probabilities(m, 1.0, 20000, 8);
  EXPECT_NEAR(rp.p1, p1_product_quadrature(m, 1.0), 3 * rp.p1_se);
  EXPECT_NEAR(frechet_cdf_quadrature(1.7, 1.2), frechet_cdf(1.7, 1.2), 1e-9);
}

TEST(Tune, PureTwoSpin) {
  const auto r = tune_profile({{2, 1.0}}, 1.0, 1.0, 0.01, 200, 2000, 3);
  EXPECT_GT(r.achieved.at(2), 0.99);
}

TEST(Tune, PureF1) {
  const auto r = tune_profile({{2, 0.0}, {3, 0.0}}, 1.0, 1.0, 0.01, 200, 2000, 3);
  EXPECT_GT(r.achieved_p1, 0.99);
}

TEST(Tune, ZeroToleranceExhaustsBudget) {
  const auto r = tune_profile({{2, 0.3}, {3, 0.3}}, 1.0, 1.0, 0.0, 40, 500, 3);
  EXPECT_FALSE(r.converged);
  EXPECT_GE(r.evaluations, 40u);
}

TEST(TailDiagnostics, Arithmetic) {
  auto t = one(100, 3, 1.0, {0, 1, 2});
  EXPECT_EQ(tail_part_diagnostics(t, single(3), 0.1)[0].bound, 0.0);
  t.blocks[0].bulk_sum_sq = 1e-4;
  const auto d = tail_part_diagnostics(t, single(3), 0.1)[0];
  EXPECT_NEAR(d.bound, 1.0, 1e-12);
  EXPECT_NEAR(d.ratio, 0.01, 1e-14);
}
