#include <gtest/gtest.h>

#include "heb/metrics.hpp"
#include "heb/sim.hpp"
#include "oracles.hpp"

using namespace heb;

TEST(Binomial, MatchesExactRationalPmf) {
  for (std::uint64_t t : {1u, 5u, 17u, 30u}) {
    for (const char* ps : {"0.1", "0.35", "0.5", "0.9"}) {
      const Rational p = from_decimal<Rational>(ps);
      for (std::uint64_t n = 0; n <= t; ++n) {
        const double exact = to_double(oracle::binomial_pmf(n, t, p));
        EXPECT_NEAR(binomial_pmf(n, t, to_double(p)), exact, 1e-12 + 1e-10 * exact) << t << ' ' << ps << ' ' << n;
      }
    }
  }
  EXPECT_EQ(binomial_pmf(3, 2, 0.5), 0.0);
  EXPECT_EQ(binomial_pmf(0, 4, 0.0), 1.0);
  EXPECT_EQ(binomial_pmf(4, 4, 1.0), 1.0);
}

TEST(ExpectedWeight, MatchesExactEnumeration) {
  for (std::uint64_t l : {10u, 20u, 30u}) {
    for (const char* bs : {"0.1", "0.2", "0.5"}) {
      const Rational b = from_decimal<Rational>(bs);
      const double share = to_double(b);
      const auto quota = prescribed_quota(share, l);
      const double exact = to_double(oracle::expected_weight(b, l, quota, Rational(20)));
      EXPECT_NEAR(expected_weight(share, l, 20), exact, 1e-9 * exact);
    }
  }
}

TEST(ExpectedWeight, MatchesMonteCarlo) {
  const double mc = oracle::mc_expected_weight(0.3, 1000, 300, 20, 4000, 17);
  EXPECT_NEAR(expected_weight(0.3, 1000, 20) / mc, 1.0, 0.005);
}

TEST(Quota, ToleratesBinaryFractions) {
  EXPECT_EQ(prescribed_quota(0.3, 1000), 300u);
  EXPECT_EQ(prescribed_quota(0.15, 1000), 150u);
  EXPECT_EQ(prescribed_quota(0.2, 8), 1u);
}

TEST(ConditionalWeight, Piecewise) {
  EXPECT_DOUBLE_EQ(conditional_weight(5, std::uint64_t{10}, 100, 20), 100);
  EXPECT_DOUBLE_EQ(conditional_weight(15, std::uint64_t{10}, 100, 20), 205);
  EXPECT_THROW(conditional_weight(101, std::uint64_t{10}, 100, 20), std::out_of_range);
}

TEST(Epsilon, ReferenceDistributions) {
  const std::vector<std::pair<std::vector<double>, double>> rows{
      {{0.2, 0.8}, 0.0029},
      {{0.1, 0.15, 0.2, 0.2, 0.35}, 0.0025},
      {{0.2, 0.4, 0.4}, 0.0015},
      {{0.2, 0.2, 0.3, 0.3}, 0.0007},
      {{0.2, 0.2, 0.2, 0.2, 0.2}, 0.0},
  };
  for (const auto& [d, want] : rows) EXPECT_NEAR(epsilon({d}, 1000, 20), want, 2e-4);
}

TEST(Epsilon, UniformIsZeroAndTwoMinerMatchesMonteCarlo) {
  for (std::size_t n : {2u, 4u, 5u, 10u}) EXPECT_NEAR(epsilon(BalanceDistribution::uniform(n), 1000, 20), 0, 1e-12);
  const double w3 = oracle::mc_expected_weight(0.3, 1000, 300, 20, 6000, 5);
  const double w7 = oracle::mc_expected_weight(0.7, 1000, 700, 20, 6000, 6);
  const double mc_eps = std::abs(0.3 - w3 / (w3 + w7));
  EXPECT_NEAR(epsilon({{0.3, 0.7}}, 1000, 20), mc_eps, 5e-4);
}

TEST(Distribution, ValidationNamesShares) {
  try {
    BalanceDistribution{{0.5, 0.6}}.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("shares"), std::string::npos);
  }
  EXPECT_THROW(BalanceDistribution{{}}.validate(), std::invalid_argument);
  EXPECT_THROW((BalanceDistribution{{-0.5, 1.5}}.validate()), std::invalid_argument);
}

TEST(Curves, LengthSweepRisesTowardOne) {
  std::vector<std::uint64_t> ls;
  for (std::uint64_t l = 100; l <= 3000; l += 100) ls.push_back(l);
  const std::vector<double> shares{0.05, 0.1, 0.2, 0.4};
  const auto pts = weight_curve_by_length(shares, ls, 20);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].share != pts[i - 1].share) continue;
    EXPECT_GT(pts[i].value, pts[i - 1].value);
    EXPECT_LT(pts[i].value, 1.0);
  }
  EXPECT_GT(pts[ls.size() - 1].value, 0.95);
}

TEST(Curves, FactorSweepAtUnitFactorIsOne) {
  const std::vector<double> shares{0.1, 0.4};
  const std::vector<double> phis{1};
  for (const auto& p : weight_curve_by_factor(shares, phis, 1000)) EXPECT_NEAR(p.value, 1.0, 1e-12);
}

TEST(PowOnly, BoundEquivalence) {
  for (int i = 0; i < 100; ++i) {
    const double rho = i / 100.0;
    const double bound = pow_only_bound(rho);
    for (double b : {bound - 1e-6, bound + 1e-6, 0.01, 0.99}) {
      if (b <= 0 || b >= 1) continue;
      EXPECT_EQ(pow_only_alpha(b, rho) > 0.5, b > bound) << rho << ' ' << b;
    }
  }
  EXPECT_DOUBLE_EQ(pow_only_bound(0), 0.5);
  EXPECT_THROW(pow_only_bound(1), std::invalid_argument);
}

TEST(Takeover, MatchesRaceDp) {
  for (std::uint64_t l : {1u, 2u, 5u, 20u, 100u}) {
    for (double a : {0.2, 0.5, 0.5714, 0.8}) EXPECT_NEAR(takeover_probability(l, a), oracle::race_dp(l, a), 1e-10);
  }
}

TEST(Permissiveness, ClosedForm) {
  EXPECT_NEAR(permissiveness(0.1, 20), 1 / 18.1, 1e-15);
  EXPECT_NEAR(permissiveness(0.3, 1), 1.0, 1e-15);
  EXPECT_NEAR(permissiveness_with_rho(0.1, 20, 0), permissiveness(0.1, 20), 1e-15);
  EXPECT_NEAR(permissiveness_with_rho(0.1, 20, 0.5), 1 / 9.1, 1e-15);
}

TEST(Permissiveness, WithRhoAgreesWithSimulation) {
  EpochParams<double> p;
  p.epoch_len = 400;
  p.factor = 5;
  p.rho = 0.5;
  const auto proto = make_protocol<double>("heb");
  const std::vector<double> shares{0.1, 0.9};
  auto mean_minted = [&](const char* joiner) {
    std::vector<StrategyPtr<double>> st{make_strategy<double>(joiner, proto), proto.prescribed};
    const auto miners = equilibrium_miners<double>(shares, p, st);
    double total = 0;
    for (std::uint64_t r = 0; r < 150; ++r) {
      const auto res = run_epoch(p, miners, proto, run_seed(3, r));
      total += res.payout.minted.count(0) ? res.payout.minted.at(0) : 0.0;
    }
    return total / 150;
  };
  // Joining with no internal tokens vs the prescribed split; compare minted value only.
  const double ratio = mean_minted("no_ic") / mean_minted("prescribed");
  const double expect = permissiveness_with_rho(0.1, 5, 0.5);
  EXPECT_NEAR(ratio, expect, 0.1 * expect);
}

TEST(BinomialTail, TenPercentBand) {
  const auto t = binomial_tail(1000, 0.3, 0.10);
  EXPECT_NEAR(t.lower, 0.02, 0.005);
  EXPECT_NEAR(t.upper, 0.018, 0.005);
  EXPECT_THROW(binomial_tail(1000, 0.3, 0), std::invalid_argument);
}

TEST(Costs, ClosedForms) {
  const auto c = attack_costs(0.5);
  EXPECT_EQ(c.refunded, 1.0);
  EXPECT_EQ(c.sabotage, 0.5);
  EXPECT_EQ(external_expense(0.5), 0.5);
  EXPECT_EQ(nakamoto_external_expense(), 1.0);
  EXPECT_NEAR(redistribution_bound(500, 1e9), 500.0 * 500 / (500 + 1e9), 1e-18);
}

TEST(Report, Aggregates) {
  const auto r = metric_report({{0.2, 0.8}}, 1000, 20, 0.5, 1e9);
  EXPECT_NEAR(r.epsilon, 0.0029, 2e-4);
  ASSERT_EQ(r.expected_weight.size(), 2u);
  EXPECT_NEAR(r.normalized_weight[0], r.expected_weight[0] / 0.2, 1e-9);
  EXPECT_EQ(r.attack_cost_sabotage, 0.5);
}
