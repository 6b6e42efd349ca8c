#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hpspin/heavytail_law.hpp"

using namespace hpspin;

TEST(TailProb, ConstantPowerLaw) {
  const auto law = TailLaw::constant(1.0);
  EXPECT_NEAR(tail_prob(law, 10.0), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(tail_prob(law, 1.0), 1.0);
  EXPECT_THROW(tail_prob(law, 0.3), DomainError);
}

TEST(TailProb, PolyLogAtESquared) {
  const auto law = TailLaw::polylog(0.5, 1.0);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(tail_prob(law, e2), 2.0 / std::numbers::e, 1e-12);
  EXPECT_NEAR(tail_prob(law, e2), 0.73576, 1e-5);
}

TEST(TailProb, PolyLogIsMonotone) {
  const auto law = TailLaw::polylog(1.2, 2.0);
  double prev = 1.0;
  for (double t = law.t_floor(); t < 1e8; t *= 1.7) {
    const double v = tail_prob(law, t);
    EXPECT_LE(v, prev + 1e-15);
    prev = v;
  }
}

TEST(TailLawCtor, RejectsExponentOutsideOpenInterval) {
  EXPECT_THROW(TailLaw::constant(2.5), DomainError);
  EXPECT_THROW(TailLaw::constant(0.0), DomainError);
  EXPECT_THROW(TailLaw::polylog(2.0, 1.0), DomainError);
}

TEST(QuantileB, ClosedForms) {
  EXPECT_NEAR(quantile_b(TailLaw::constant(1.0), 4, 2), 6.0, 1e-12);
  EXPECT_NEAR(quantile_b(TailLaw::constant(0.5), 4, 2), 36.0, 1e-10);
}

TEST(QuantileB, FloorWhenSingleCoupling) {
  EXPECT_DOUBLE_EQ(quantile_b(TailLaw::constant(1.3), 5, 5), 1.0);
  const auto pl = TailLaw::polylog(0.7, 1.0);
  EXPECT_DOUBLE_EQ(quantile_b(pl, 4, 4), pl.t_floor());
}

TEST(QuantileB, PolyLogInvertsTail) {
  const auto law = TailLaw::polylog(1.1, 1.5);
  for (std::size_t n : {20u, 200u, 2000u}) {
    const double b = quantile_b(law, n, 3);
    const double target = -log_binomial(n, 3);
    ASSERT_TRUE(std::isfinite(b));
    EXPECT_NEAR(std::log(tail_prob(law, b)), target, 1e-9);
  }
}

TEST(QuantileB, HugeCountStaysFinite) {
  const double lb = log_quantile_b(TailLaw::constant(0.5), 100000, 8);
  EXPECT_TRUE(std::isfinite(lb));
  EXPECT_NEAR(lb, 2.0 * log_binomial(100000, 8), 1e-9);
}

TEST(Sample, DeterministicPerSeed) {
  const auto law = TailLaw::polylog(1.0, 1.0);
  Stream a(42, 7), b(42, 7), c(43, 7);
  const auto x = sample(law, a, 500);
  const auto y = sample(law, b, 500);
  const auto z = sample(law, c, 500);
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
}

TEST(Sample, EmpiricalTailMatches) {
  const auto law = TailLaw::constant(1.5);
  Stream s(3, 0);
  const auto x = sample(law, s, 200000);
  std::size_t above = 0, neg = 0;
  for (double v : x) {
    above += std::abs(v) > 4.0;
    neg += v < 0.0;
  }
  const double p = tail_prob(law, 4.0);
  const double se = std::sqrt(p * (1 - p) / 200000.0);
  EXPECT_NEAR(static_cast<double>(above) / 200000.0, p, 4 * se);
  EXPECT_NEAR(static_cast<double>(neg) / 200000.0, 0.5, 0.005);
}

TEST(InverseTail, RoundTrip) {
  const auto law = TailLaw::polylog(0.8, 2.0);
  const double atom_edge = std::exp(law.log_tail_at_floor_plus());
  for (double u : {0.9, 0.3, 1e-3, 1e-9}) {
    if (u >= atom_edge) EXPECT_EQ(inverse_tail(law, u), law.t_floor());
    else EXPECT_NEAR(std::exp(law.log_tail_above_floor(inverse_tail(law, u))), u, 1e-9 * u);
  }
}

TEST(FrechetGof, ExactSamplesPass) {
  Stream s(11, 1);
  std::vector<double> x(2000);
  for (double& v : x) v = frechet_draw(s, 1.3);
  EXPECT_LT(frechet_gof(x, 1.3), 0.04);
}

TEST(FrechetGof, DegenerateFails) {
  std::vector<double> x(100, 1.0);
  EXPECT_GE(frechet_gof(x, 1.0), 0.5);
}

TEST(FrechetGof, RescaledModelMaxima) {
  // n=60, p=2: 1770 couplings per trial, rescaled by b_{n,p}
  const auto law = TailLaw::constant(1.0);
  const double b = quantile_b(law, 60, 2);
  std::vector<double> maxima(2000);
  for (std::size_t t = 0; t < maxima.size(); ++t) {
    Stream s(77, t);
    double m = 0.0;
    for (double v : sample(law, s, 1770)) m = std::max(m, std::abs(v));
    maxima[t] = m / b;
  }
  EXPECT_LT(frechet_gof(maxima, 1.0), 0.05);
}

TEST(Envelope, ZerosNeverViolate) {
  const auto s = OrderedSample::from_signed(std::vector<double>(50, 0.0));
  EXPECT_EQ(order_stat_envelope(s, 0.1, 1.0, 1, 100).violations, 0u);
}

TEST(Envelope, StrictlyBelow) {
  const double alpha = 1.2;
  std::vector<double> v;
  for (int i = 1; i <= 400; ++i) v.push_back((i % 2 ? 1 : -1) * 0.5 * std::pow(i, -1.0 / alpha));
  const auto s = OrderedSample::from_signed(v);
  EXPECT_EQ(order_stat_envelope(s, 0.01, alpha, 1, 100).violations, 0u);
  EXPECT_EQ(s.raw_signs.front(), 1);
}

TEST(Envelope, CountsObviousViolation) {
  const auto s = OrderedSample::from_signed(std::vector<double>{100.0, 50.0, 0.0});
  const auto r = order_stat_envelope(s, 0.1, 1.0, 1, 10);
  EXPECT_EQ(r.violations, 2u);
  EXPECT_EQ(r.first_violation, 1u);
}
