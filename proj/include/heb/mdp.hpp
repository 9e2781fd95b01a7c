#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "heb/chain.hpp"
#include "heb/rng.hpp"

namespace heb::mdp {

class StateBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest horizon the state packing supports.
inline constexpr std::uint64_t kMaxHorizon = 15;

/// One strategic miner (balance l * share * R) against a petty-compliant cohort holding the rest.
struct Instance {
  std::uint64_t epoch_len = 10;
  double factor = 20;
  double rho = 0.5;
  double mint_per_block = 1;
  double share = 0.2;
  /// Number of factored blocks the attacker paid for; empty means unlimited (rho = 0).
  std::optional<std::uint64_t> commitments;
  std::uint64_t horizon_cap = 12;

  double attacker_balance() const { return share * static_cast<double>(epoch_len) * mint_per_block; }
  double cohort_balance() const { return static_cast<double>(epoch_len) * mint_per_block - attacker_balance(); }

  double internal_spend() const {
    return commitments ? static_cast<double>(*commitments) * rho * mint_per_block : 0.0;
  }

  /// Per-step probability that the attacker creates the next block.
  double alpha() const {
    const double own = attacker_balance() - internal_spend();
    const double other = (1 - rho) * cohort_balance();
    return own <= 0 ? 0.0 : own / (own + other);
  }

  /// Factored blocks the cohort may place on one chain; empty when unlimited.
  std::optional<std::uint64_t> cohort_quota() const {
    if (rho == 0) return std::nullopt;
    return static_cast<std::uint64_t>(std::floor(cohort_balance() / mint_per_block + 1e-9));
  }

  void validate() const {
    if (epoch_len == 0) throw std::invalid_argument("epoch_len must be positive");
    if (epoch_len > std::min(horizon_cap, kMaxHorizon)) {
      throw StateBudgetError("horizon " + std::to_string(epoch_len) + " exceeds the state budget (cap " +
                             std::to_string(std::min(horizon_cap, kMaxHorizon)) + ")");
    }
    if (factor < 1) throw std::invalid_argument("factor must be >= 1");
    if (!(rho >= 0) || !(rho < 1)) throw std::invalid_argument("rho must lie in [0, 1)");
    if (!(share >= 0) || !(share < 1)) throw std::invalid_argument("share must lie in [0, 1)");
    if (rho > 0 && !commitments) throw std::invalid_argument("commitments required when rho > 0");
    if (internal_spend() > attacker_balance() + 1e-9) throw std::invalid_argument("commitments exceed the balance");
  }
};

/// Largest affordable commitment count floor(b / (rho R)), capped at l; empty when rho = 0.
inline std::optional<std::uint64_t> max_commitments(const Instance& inst) {
  if (inst.rho == 0) return std::nullopt;
  const double n = std::floor(inst.attacker_balance() / (inst.rho * inst.mint_per_block) + 1e-9);
  return std::min<std::uint64_t>(static_cast<std::uint64_t>(n), inst.epoch_len);
}

/// Commitments of the prescribed miner: floor(b / R) factored blocks, i.e. a floored quota.
inline std::optional<std::uint64_t> prescribed_commitments(const Instance& inst) {
  if (inst.rho == 0) return std::nullopt;
  const double n = std::floor(inst.attacker_balance() / inst.mint_per_block + 1e-9);
  return std::min<std::uint64_t>(static_cast<std::uint64_t>(n), inst.epoch_len);
}

/// Agreed prefix summary, the attacker's secret extension (bit k set = k-th block factored),
/// the length of the cohort's public extension, and whether the cohort is split between
/// the public extension and an equally long, equally heavy published attacker prefix.
/// Cohort block types are implied by its quota, so only the length is kept.
struct State {
  std::uint8_t att_factored = 0;
  std::uint8_t att_regular = 0;
  std::uint8_t cohort = 0;
  std::uint16_t secret = 0;
  std::uint8_t secret_len = 0;
  std::uint8_t public_len = 0;
  bool fork = false;

  std::uint64_t established() const { return std::uint64_t{att_factored} + att_regular + cohort; }
  std::uint32_t secret_factored(std::uint32_t prefix) const {
    return static_cast<std::uint32_t>(std::popcount(static_cast<std::uint32_t>(secret) & ((1u << prefix) - 1u)));
  }

  std::uint64_t key() const {
    return std::uint64_t{att_factored} | std::uint64_t{att_regular} << 4 | std::uint64_t{cohort} << 8 |
           std::uint64_t{secret} << 12 | std::uint64_t{secret_len} << 28 | std::uint64_t{public_len} << 32 |
           std::uint64_t{fork} << 36;
  }

  static State from_key(std::uint64_t k) {
    State s;
    s.att_factored = k & 0xf;
    s.att_regular = (k >> 4) & 0xf;
    s.cohort = (k >> 8) & 0xf;
    s.secret = (k >> 12) & 0xffff;
    s.secret_len = (k >> 28) & 0xf;
    s.public_len = (k >> 32) & 0xf;
    s.fork = (k >> 36) & 1;
    return s;
  }

  friend bool operator==(const State&, const State&) = default;
};

enum class ChainAction : std::uint8_t { wait, adopt, publish };

struct Action {
  ChainAction chain = ChainAction::wait;
  std::uint8_t count = 0;  // prefix length for publish
  BlockKind next = BlockKind::regular;
  friend bool operator==(const Action&, const Action&) = default;
};

inline std::string to_string(const Action& a) {
  std::string s = a.chain == ChainAction::wait    ? "wait"
                  : a.chain == ChainAction::adopt ? "adopt"
                                                  : "publish(" + std::to_string(a.count) + ")";
  return s + "+" + heb::to_string(a.next);
}

struct Outcome {
  double probability = 0;
  State state;
  std::optional<double> reward;  // set when the epoch concluded
};

/// Game rules for one instance: actions, their effect, and the block-creation step.
class Model {
 public:
  explicit Model(Instance inst) : inst_(inst), alpha_(inst.alpha()), cohort_quota_(inst.cohort_quota()) {
    inst_.validate();
  }

  const Instance& instance() const { return inst_; }
  double alpha() const { return alpha_; }

  bool cohort_factored(std::uint64_t index_on_chain) const { return !cohort_quota_ || index_on_chain < *cohort_quota_; }

  /// Factored cohort blocks among positions [from, from + n) of the cohort's chain.
  std::uint64_t cohort_factored_in(std::uint64_t from, std::uint64_t n) const {
    if (!cohort_quota_) return n;
    if (from >= *cohort_quota_) return 0;
    return std::min(n, *cohort_quota_ - from);
  }

  double public_weight(const State& s) const {
    const auto f = cohort_factored_in(s.cohort, s.public_len);
    return static_cast<double>(f) * inst_.factor + static_cast<double>(s.public_len - f);
  }
  double secret_weight(const State& s, std::uint32_t prefix) const {
    const auto f = s.secret_factored(prefix);
    return static_cast<double>(f) * inst_.factor + static_cast<double>(prefix - f);
  }

  bool may_factor(const State& s) const {
    return !inst_.commitments || std::uint64_t{s.att_factored} + s.secret_factored(s.secret_len) < *inst_.commitments;
  }

  /// The state after `a`'s chain action, or nullopt if the action is invalid or a no-op.
  std::optional<State> apply(const State& s, const Action& a) const {
    if (a.next == BlockKind::factored && !may_factor_after(s, a)) return std::nullopt;
    switch (a.chain) {
      case ChainAction::wait: return s;
      case ChainAction::adopt: {
        if (s.public_len == 0) return std::nullopt;
        State t = s;
        t.cohort = static_cast<std::uint8_t>(t.cohort + t.public_len);
        t.public_len = 0;
        t.secret = 0;
        t.secret_len = 0;
        t.fork = false;
        return t;
      }
      case ChainAction::publish: {
        const std::uint32_t m = a.count;
        if (m == 0 || m > s.secret_len || m < s.public_len) return std::nullopt;
        if (m > s.public_len) return merge_secret(s, m, 0);
        if (s.fork) return std::nullopt;
        const double mine = secret_weight(s, m);
        const double theirs = public_weight(s);
        if (mine < theirs) return merge_secret(s, m, 0);
        if (mine > theirs) return std::nullopt;
        State t = s;
        t.fork = true;
        return t;
      }
    }
    return std::nullopt;
  }

  /// All actions that are valid in `s`.
  std::vector<Action> actions(const State& s) const {
    std::vector<Action> out;
    auto add = [&](ChainAction c, std::uint8_t m) {
      for (BlockKind k : {BlockKind::factored, BlockKind::regular}) {
        Action a{c, m, k};
        if (apply(s, a)) out.push_back(a);
      }
    };
    add(ChainAction::wait, 0);
    add(ChainAction::adopt, 0);
    for (std::uint8_t m = 1; m <= s.secret_len; ++m) add(ChainAction::publish, m);
    return out;
  }

  /// Block creation after the chain action: the attacker appends `next` to her secret
  /// extension, or the cohort extends its chosen tip.
  std::vector<Outcome> step(const State& post, BlockKind next) const {
    std::vector<Outcome> out;
    if (alpha_ > 0) {
      State t = post;
      if (next == BlockKind::factored) t.secret |= static_cast<std::uint16_t>(1u << t.secret_len);
      ++t.secret_len;
      out.push_back(finish(alpha_, t));
    }
    if (alpha_ < 1) {
      const double q = 1 - alpha_;
      if (post.fork) {
        State keep = post;
        keep.fork = false;
        ++keep.public_len;
        out.push_back(finish(q / 2, keep));
        State swap = merge_secret(post, post.public_len, 1);
        out.push_back(finish(q / 2, swap));
      } else {
        State t = post;
        ++t.public_len;
        out.push_back(finish(q, t));
      }
    }
    return out;
  }

  /// Attacker's minted share, ignoring the redistribution term.
  double reward(std::uint64_t att_f, std::uint64_t att_r, std::uint64_t cohort) const {
    const auto coh_f = cohort_factored_in(0, cohort);
    const double wa = static_cast<double>(att_f) * inst_.factor + static_cast<double>(att_r);
    const double wc = static_cast<double>(coh_f) * inst_.factor + static_cast<double>(cohort - coh_f);
    return wa / (wa + wc) * static_cast<double>(inst_.epoch_len) * inst_.mint_per_block;
  }

 private:
  bool may_factor_after(const State& s, const Action& a) const {
    auto t = apply_chain_only(s, a);
    return t && may_factor(*t);
  }

  std::optional<State> apply_chain_only(const State& s, const Action& a) const {
    Action plain = a;
    plain.next = BlockKind::regular;
    return apply(s, plain);
  }

  /// Moves the first m secret blocks into the agreed prefix; the cohort then sits on
  /// them with `new_public` fresh blocks.
  static State merge_secret(const State& s, std::uint32_t m, std::uint8_t new_public) {
    State t = s;
    const auto f = s.secret_factored(m);
    t.att_factored = static_cast<std::uint8_t>(t.att_factored + f);
    t.att_regular = static_cast<std::uint8_t>(t.att_regular + (m - f));
    t.secret = static_cast<std::uint16_t>(s.secret >> m);
    t.secret_len = static_cast<std::uint8_t>(s.secret_len - m);
    t.public_len = new_public;
    t.fork = false;
    return t;
  }

  Outcome finish(double p, const State& t) const {
    Outcome o{p, t, std::nullopt};
    const auto base = t.established();
    if (base + t.public_len >= inst_.epoch_len) {
      o.reward = reward(t.att_factored, t.att_regular, std::uint64_t{t.cohort} + t.public_len);
    } else if (base + t.secret_len >= inst_.epoch_len) {
      const auto f = t.secret_factored(t.secret_len);
      o.reward = reward(t.att_factored + f, t.att_regular + (t.secret_len - f), t.cohort);
    }
    return o;
  }

  Instance inst_;
  double alpha_;
  std::optional<std::uint64_t> cohort_quota_;
};

struct PolicyEntry {
  double value = 0;
  Action action;
};

struct Solution {
  double value = 0;
  std::unordered_map<std::uint64_t, PolicyEntry> policy;  // keyed by State::key()

  const Action& action(const State& s) const { return policy.at(s.key()).action; }
};

inline constexpr std::size_t kDefaultStateBudget = 20'000'000;

namespace detail {

template <class Chooser>
double evaluate(const Model& model, const State& s, std::unordered_map<std::uint64_t, PolicyEntry>& memo,
                std::size_t budget, const Chooser& choose) {
  if (auto it = memo.find(s.key()); it != memo.end()) return it->second.value;
  if (memo.size() >= budget) throw StateBudgetError("state budget of " + std::to_string(budget) + " exceeded");

  auto value_of = [&](const Action& a) {
    const State post = *model.apply(s, a);
    double v = 0;
    for (const Outcome& o : model.step(post, a.next)) {
      v += o.probability * (o.reward ? *o.reward : evaluate(model, o.state, memo, budget, choose));
    }
    return v;
  };
  const PolicyEntry best = choose(s, value_of);
  memo[s.key()] = best;
  return best.value;
}

}  // namespace detail

/// Exact backward induction (memoized over the acyclic state graph). Ties keep the
/// first action in Model::actions order, so the policy is deterministic.
inline Solution solve(const Instance& inst, std::size_t budget = kDefaultStateBudget) {
  const Model model(inst);
  Solution sol;
  auto choose = [&](const State& s, const auto& value_of) {
    PolicyEntry best{-1, {}};
    for (const Action& a : model.actions(s)) {
      const double v = value_of(a);
      if (v > best.value + 1e-12) best = {v, a};
    }
    return best;
  };
  sol.value = detail::evaluate(model, State{}, sol.policy, budget, choose);
  return sol;
}

/// Publish every secret block at once, otherwise adopt the public chain; factored while allowed.
inline Action honest_action(const Model& model, const State& s) {
  Action a;
  if (s.secret_len > 0) {
    a = {ChainAction::publish, s.secret_len, BlockKind::regular};
  } else if (s.public_len > 0) {
    a = {ChainAction::adopt, 0, BlockKind::regular};
  }
  Action f = a;
  f.next = BlockKind::factored;
  if (model.apply(s, f)) return f;
  return a;
}

/// Exact value of the honest policy.
inline Solution evaluate_honest(const Instance& inst, std::size_t budget = kDefaultStateBudget) {
  const Model model(inst);
  Solution sol;
  auto choose = [&](const State& s, const auto& value_of) {
    const Action a = honest_action(model, s);
    return PolicyEntry{value_of(a), a};
  };
  sol.value = detail::evaluate(model, State{}, sol.policy, budget, choose);
  return sol;
}

struct RolloutStats {
  std::uint64_t games = 0;
  double mean = 0;
  double variance = 0;
  double stderr_mean = 0;
};

/// Plays `games` epochs under `policy`, sampling block creators; rollout r uses stream r.
inline RolloutStats rollout(const Instance& inst, const Solution& policy, std::uint64_t games, std::uint64_t seed) {
  if (games == 0) throw std::invalid_argument("games must be >= 1");
  const Model model(inst);
  RolloutStats st;
  st.games = games;
  std::vector<double> rewards;
  rewards.reserve(games);
  for (std::uint64_t g = 0; g < games; ++g) {
    Rng rng = Rng(seed).split(g);
    State s{};
    for (;;) {
      const Action a = policy.action(s);
      const State post = *model.apply(s, a);
      const auto outcomes = model.step(post, a.next);
      double u = rng.uniform01();
      const Outcome* pick = &outcomes.back();
      for (const Outcome& o : outcomes) {
        if (u < o.probability) {
          pick = &o;
          break;
        }
        u -= o.probability;
      }
      if (pick->reward) {
        rewards.push_back(*pick->reward);
        break;
      }
      s = pick->state;
    }
  }
  for (double r : rewards) st.mean += r;
  st.mean /= static_cast<double>(games);
  double ss = 0;
  for (double r : rewards) ss += (r - st.mean) * (r - st.mean);
  st.variance = games > 1 ? ss / static_cast<double>(games - 1) : 0.0;
  st.stderr_mean = std::sqrt(st.variance / static_cast<double>(games));
  return st;
}

/// Welch statistic (a - b) / sqrt(se_a^2 + se_b^2); 0 when both errors vanish.
inline double welch_z(const RolloutStats& a, const RolloutStats& b) {
  const double se = std::sqrt(a.stderr_mean * a.stderr_mean + b.stderr_mean * b.stderr_mean);
  const double d = a.mean - b.mean;
  if (se == 0) return d == 0 ? 0.0 : (d > 0 ? INFINITY : -INFINITY);
  return d / se;
}

struct Candidate {
  std::optional<std::uint64_t> commitments;
  double alpha = 0;
  double value = 0;
  RolloutStats rollouts;
};

/// True when `policy` acts like the honest policy on every state it can reach.
inline bool matches_honest(const Instance& inst, const Solution& policy) {
  const Model model(inst);
  std::vector<State> stack{State{}};
  std::unordered_map<std::uint64_t, bool> seen;
  while (!stack.empty()) {
    const State s = stack.back();
    stack.pop_back();
    if (!seen.emplace(s.key(), true).second) continue;
    const Action a = policy.action(s);
    if (!(a == honest_action(model, s))) return false;
    for (const Outcome& o : model.step(*model.apply(s, a), a.next)) {
      if (!o.reward && o.probability > 0) stack.push_back(o.state);
    }
  }
  return true;
}

struct BestResponse {
  Candidate best;        // highest rollout mean
  Candidate prescribed;  // honest policy at the prescribed commitments
  std::vector<Candidate> candidates;
  Solution policy;  // optimal policy of `best`
  /// Exact gain of the best candidate over prescribed play.
  double gain = 0;
  /// Welch statistic of best vs prescribed rollout means.
  double z_score = 0;
  /// The best candidate commits like, and behaves like, the prescribed strategy.
  bool prescribed_shape = false;
  bool is_prescribed = false;
};

/// Rollout gains below this many standard errors are not counted as deviations.
inline constexpr double kSignificance = 3.0;

/// Solves every affordable commitment count, plays each optimal policy `games` times and
/// compares the most rewarding one against prescribed play. Every candidate is played on
/// the same rollout seeds.
inline BestResponse best_response(double share, std::uint64_t epoch_len, double factor, double rho,
                                  std::uint64_t games, std::uint64_t seed, std::uint64_t horizon_cap = 12) {
  Instance base;
  base.epoch_len = epoch_len;
  base.factor = factor;
  base.rho = rho;
  base.share = share;
  base.horizon_cap = horizon_cap;

  std::vector<std::optional<std::uint64_t>> js;
  if (const auto jmax = max_commitments(base)) {
    for (std::uint64_t j = 0; j <= *jmax; ++j) js.emplace_back(j);
  } else {
    js.emplace_back(std::nullopt);
  }

  const std::uint64_t rollout_seed = derive_seed(seed, 0);
  const auto j_presc = prescribed_commitments(base);
  BestResponse br;
  for (const auto& j : js) {
    Instance inst = base;
    inst.commitments = j;
    Solution sol = solve(inst);
    Candidate cand{j, inst.alpha(), sol.value, rollout(inst, sol, games, rollout_seed)};
    if (br.candidates.empty() || cand.rollouts.mean > br.best.rollouts.mean) {
      br.best = cand;
      br.prescribed_shape = j == j_presc && matches_honest(inst, sol);
      br.policy = std::move(sol);
    }
    br.candidates.push_back(cand);
  }

  Instance presc = base;
  presc.commitments = j_presc;
  const Solution honest = evaluate_honest(presc);
  br.prescribed = {j_presc, presc.alpha(), honest.value, rollout(presc, honest, games, rollout_seed)};
  br.gain = br.best.value - br.prescribed.value;
  br.z_score = welch_z(br.best.rollouts, br.prescribed.rollouts);
  br.is_prescribed = br.prescribed_shape || br.z_score < kSignificance;
  return br;
}

struct MinFactorResult {
  std::optional<double> factor;  // empty = no factor in range makes prescribed play a best response
  std::uint64_t probes = 0;
  /// Post-hoc monotonicity probes: just below the result should fail, twice it should pass.
  bool below_fails = true;
  bool double_passes = true;
};

/// Least factor in [lo, hi] at which prescribed play is a best response, by bisection in log space.
inline MinFactorResult min_factor(double share, double rho, std::uint64_t epoch_len, std::uint64_t games,
                                  std::uint64_t seed, double lo = 1, double hi = 1e8, double rel_tol = 1e-3,
                                  std::uint64_t horizon_cap = 12) {
  if (!(lo >= 1) || !(hi > lo)) throw std::invalid_argument("factor range must satisfy 1 <= lo < hi");
  MinFactorResult res;
  auto passes = [&](double phi) {
    ++res.probes;
    return best_response(share, epoch_len, phi, rho, games, seed, horizon_cap).is_prescribed;
  };
  if (!passes(hi)) return res;
  if (passes(lo)) {
    res.factor = lo;
    res.double_passes = passes(std::min(hi, 2 * lo));
    return res;
  }
  while (hi / lo > 1 + rel_tol) {
    const double mid = std::sqrt(lo * hi);
    (passes(mid) ? hi : lo) = mid;
  }
  res.factor = hi;
  res.below_fails = !passes(hi / (1 + 10 * rel_tol));
  res.double_passes = passes(std::min(2 * hi, 1e8));
  return res;
}

}  // namespace heb::mdp
