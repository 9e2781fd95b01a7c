#include <gtest/gtest.h>

#include "heb/io.hpp"
#include "heb/mdp.hpp"
#include "oracles.hpp"

using namespace heb;
using namespace heb::mdp;

namespace {

Instance inst(std::uint64_t l, double share, double factor, double rho, std::optional<std::uint64_t> j = std::nullopt) {
  Instance i;
  i.epoch_len = l;
  i.share = share;
  i.factor = factor;
  i.rho = rho;
  i.commitments = j;
  return i;
}

double tree_value(const Instance& i) {
  oracle::GameSpec g;
  g.l = i.epoch_len;
  g.alpha = i.alpha();
  g.factor = i.factor;
  g.attacker_quota = i.commitments;
  g.cohort_quota = i.cohort_quota();
  g.reward_pool = static_cast<double>(i.epoch_len) * i.mint_per_block;
  return oracle::GameTree(g).value();
}

}  // namespace

TEST(Instance, AlphaAndQuotas) {
  auto i = inst(10, 0.2, 20, 0.5, 2);
  // b = 2, spend 1; cohort external (1 - 0.5) * 8 = 4.
  EXPECT_NEAR(i.alpha(), 1.0 / 5.0, 1e-15);
  EXPECT_EQ(i.cohort_quota(), 8u);
  EXPECT_EQ(max_commitments(i), 4u);
  EXPECT_EQ(prescribed_commitments(i), 2u);
  EXPECT_FALSE(inst(10, 0.2, 20, 0).cohort_quota());
  EXPECT_FALSE(max_commitments(inst(10, 0.2, 20, 0)));
  double prev = 1;
  for (std::uint64_t j = 0; j <= 4; ++j) {
    const double a = inst(10, 0.2, 20, 0.5, j).alpha();
    EXPECT_LT(a, prev);
    prev = a;
  }
  EXPECT_THROW(inst(13, 0.2, 20, 0).validate(), StateBudgetError);
  EXPECT_THROW(inst(10, 0.2, 20, 0.5).validate(), std::invalid_argument);  // commitments missing
  EXPECT_THROW(inst(10, 0.2, 20, 0.5, 5).validate(), std::invalid_argument);
}

TEST(Model, FirstStepOutcomes) {
  auto i = inst(10, 0.2, 20, 0);
  const Model m(i);
  const auto out = m.step(*m.apply(State{}, {ChainAction::wait, 0, BlockKind::factored}), BlockKind::factored);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0].probability, 0.2, 1e-12);
  EXPECT_EQ(out[0].state.secret_len, 1);
  EXPECT_EQ(out[0].state.secret, 1);
  EXPECT_NEAR(out[1].probability, 0.8, 1e-12);
  EXPECT_EQ(out[1].state.public_len, 1);
  EXPECT_TRUE(m.cohort_factored(0));
}

TEST(Model, LighterEqualLengthPublishWinsTheCohort) {
  const Model m(inst(10, 0.2, 20, 0));
  State s;
  s.secret_len = 1;  // one regular secret block
  s.public_len = 1;  // one factored cohort block
  const auto t = m.apply(s, {ChainAction::publish, 1, BlockKind::regular});
  ASSERT_TRUE(t);
  EXPECT_EQ(t->att_regular, 1);
  EXPECT_EQ(t->public_len, 0);
  EXPECT_FALSE(t->fork);
  // The cohort block was orphaned, so the next cohort block lands on the attacker's.
  const auto out = m.step(*t, BlockKind::regular);
  EXPECT_EQ(out.back().state.public_len, 1);
  EXPECT_EQ(out.back().state.att_regular, 1);
}

TEST(Model, EqualWeightPublishForks) {
  const Model m(inst(10, 0.2, 20, 0));
  State s;
  s.secret = 0b01;  // [F, R]
  s.secret_len = 2;
  s.public_len = 1;
  const auto t = m.apply(s, {ChainAction::publish, 1, BlockKind::regular});
  ASSERT_TRUE(t);
  EXPECT_TRUE(t->fork);
  const auto out = m.step(*t, BlockKind::regular);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NEAR(out[1].probability, out[2].probability, 1e-15);
  EXPECT_EQ(out[2].state.att_factored, 1);  // cohort built on the attacker's prefix
  EXPECT_EQ(out[2].state.secret_len, 1);
  // Heavier equal-length publish, shorter publish and empty adopt are no-ops.
  const Model mq(inst(10, 0.2, 20, 0.5, 1));
  State h;
  h.cohort = 8;  // cohort quota used up: its next block is regular
  h.secret = 0b1;
  h.secret_len = 1;
  h.public_len = 1;
  EXPECT_FALSE(mq.apply(h, {ChainAction::publish, 1, BlockKind::regular}));
  State shorter;
  shorter.secret_len = 1;
  shorter.public_len = 2;
  EXPECT_FALSE(m.apply(shorter, {ChainAction::publish, 1, BlockKind::regular}));
  EXPECT_FALSE(m.apply(State{}, {ChainAction::adopt, 0, BlockKind::regular}));
}

TEST(Model, QuotaLimitsFactoredActions) {
  const Model m(inst(10, 0.2, 20, 0.5, 1));
  State s;
  EXPECT_TRUE(m.apply(s, {ChainAction::wait, 0, BlockKind::factored}));
  s.secret = 1;
  s.secret_len = 1;
  EXPECT_FALSE(m.apply(s, {ChainAction::wait, 0, BlockKind::factored}));
  s.public_len = 1;
  // Adopting discards the secret factored block and frees the commitment.
  EXPECT_TRUE(m.apply(s, {ChainAction::adopt, 0, BlockKind::factored}));
}

TEST(Model, TerminalRewardUsesAggregatesOnly) {
  const Model m(inst(6, 0.3, 4, 0.5, 2));
  // cohort quota floor(6 - 1.8) = 4: of 3 cohort blocks all are factored.
  EXPECT_NEAR(m.reward(1, 2, 3), (4.0 + 2) / (6 + 12) * 6, 1e-12);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    // Any order of the same aggregate blocks gives the same weight.
    std::vector<int> blocks{0, 1, 1, 2, 2, 2};  // 0 = att F, 1 = att R, 2 = cohort
    for (std::size_t k = blocks.size(); k > 1; --k) std::swap(blocks[k - 1], blocks[rng.index(k)]);
    double wa = 0, wc = 0;
    int cohort_seen = 0;
    for (int b : blocks) {
      if (b == 0) wa += 4;
      if (b == 1) wa += 1;
      if (b == 2) wc += cohort_seen++ < 4 ? 4 : 1;
    }
    EXPECT_NEAR(m.reward(1, 2, 3), wa / (wa + wc) * 6, 1e-12);
  }
}

TEST(Solve, ZeroShareEarnsNothing) {
  EXPECT_EQ(solve(inst(6, 0, 20, 0)).value, 0.0);
  EXPECT_EQ(solve(inst(6, 0, 20, 0.5, 0)).value, 0.0);
}

TEST(Solve, TwoBlockHorizonMatchesGameTree) {
  EXPECT_NEAR(solve(inst(2, 0.5, 1, 0)).value, tree_value(inst(2, 0.5, 1, 0)), 1e-12);
  for (double share : {0.1, 0.3, 0.45}) {
    for (double phi : {1.0, 3.0, 20.0}) {
      EXPECT_NEAR(solve(inst(2, share, phi, 0)).value, tree_value(inst(2, share, phi, 0)), 1e-12);
      EXPECT_NEAR(solve(inst(2, share, phi, 0.5, 0)).value, tree_value(inst(2, share, phi, 0.5, 0)), 1e-12);
    }
  }
}

TEST(Solve, LongerHorizonsMatchGameTree) {
  for (std::uint64_t l : {3u, 4u}) {
    for (const auto& i : {inst(l, 0.3, 1, 0), inst(l, 0.4, 5, 0), inst(l, 0.4, 20, 0.5, 1), inst(l, 0.2, 20, 0.3, 2)}) {
      EXPECT_NEAR(solve(i).value, tree_value(i), 1e-9) << l << ' ' << i.share << ' ' << i.factor;
    }
  }
}

TEST(Solve, UnitFactorSelfishMining) {
  const auto small = inst(10, 0.1, 1, 0);
  EXPECT_NEAR(solve(small).value, 1.0, 1e-9);
  EXPECT_NEAR(evaluate_honest(small).value, 1.0, 1e-9);
  const auto big = inst(10, 0.3, 1, 0);
  EXPECT_GT(solve(big).value, evaluate_honest(big).value + 1e-6);
}

TEST(Solve, HonestNeverBeatsOptimal) {
  for (double rho : {0.0, 0.3, 0.6}) {
    auto i = inst(6, 0.25, 10, rho, rho == 0 ? std::nullopt : std::optional<std::uint64_t>(1));
    EXPECT_GE(solve(i).value + 1e-12, evaluate_honest(i).value);
  }
}

TEST(Solve, StateBudget) {
  EXPECT_THROW(solve(inst(8, 0.3, 20, 0), 100), StateBudgetError);
}

TEST(Rollout, AgreesWithExactValue) {
  const auto i = inst(8, 0.3, 5, 0.4, 2);
  const auto sol = solve(i);
  const auto r = rollout(i, sol, 10000, 21);
  EXPECT_NEAR(r.mean, sol.value, 3 * r.stderr_mean);
  const auto again = rollout(i, sol, 10000, 21);
  EXPECT_EQ(r.mean, again.mean);
}

TEST(BestResponse, HonestCohortSizedMinerIsPrescribed) {
  const auto br = best_response(0.1, 10, 20, 0.5, 500, 1);
  EXPECT_TRUE(br.is_prescribed);
  EXPECT_EQ(br.prescribed.commitments, 1u);
  EXPECT_EQ(br.candidates.size(), 3u);  // j = 0, 1, 2
  const auto once = best_response(0.3, 6, 20, 0.5, 1, 9);
  const auto twice = best_response(0.3, 6, 20, 0.5, 1, 9);
  EXPECT_EQ(once.best.rollouts.mean, twice.best.rollouts.mean);
  EXPECT_EQ(once.is_prescribed, twice.is_prescribed);
}

TEST(BestResponse, LargeMinerDeviates) {
  for (double rho : {0.4, 0.5}) EXPECT_FALSE(best_response(0.3, 10, 1e8, rho, 500, 1).is_prescribed);
}

TEST(MinFactor, SmallMinerFiniteUnderModerateRho) {
  const auto r = min_factor(0.1, 0.5, 10, 500, 1);
  ASSERT_TRUE(r.factor);
  EXPECT_LE(*r.factor, 20);
  EXPECT_TRUE(r.below_fails);
  EXPECT_TRUE(r.double_passes);
  EXPECT_FALSE(min_factor(0.3, 0.5, 10, 500, 1).factor);
  EXPECT_THROW(min_factor(0.1, 0.5, 10, 500, 1, 5, 2), std::invalid_argument);
}

TEST(Io, PolicyDumpIsSorted) {
  const auto i = inst(3, 0.2, 20, 0);
  const auto j = io::policy_to_json(i, solve(i));
  EXPECT_EQ(j.at("instance").at("epoch_len"), 3);
  const auto& states = j.at("states");
  ASSERT_FALSE(states.empty());
  EXPECT_EQ(states[0].at("secret"), "");
}
