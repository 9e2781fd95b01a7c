#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "heb/chain.hpp"
#include "heb/protocol.hpp"
#include "heb/rng.hpp"
#include "heb/strategy.hpp"
#include "heb/world.hpp"

namespace heb {

/// A strategy broke the model's rules (invalid parent, quota breach, foreign publish...).
class StrategyFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No miner can create a valid block, e.g. zero external spend or exhausted mandatory quotas.
class StalledError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The publication loop or the epoch itself failed to make progress within its cap.
class NonTerminationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Num>
struct MinerConfig {
  MinerId id = 0;
  Num balance{};
  StrategyPtr<Num> strategy;
};

/// Miners with b_i = share_i * l * R, so that total balance equals the epoch's minted value.
template <class Num>
std::vector<MinerConfig<Num>> equilibrium_miners(std::span<const Num> shares, const EpochParams<Num>& params,
                                                 std::span<const StrategyPtr<Num>> strategies) {
  if (shares.size() != strategies.size()) throw std::invalid_argument("shares and strategies differ in size");
  const Num total = from_int<Num>(static_cast<long long>(params.epoch_len)) * params.mint_per_block;
  std::vector<MinerConfig<Num>> miners;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    miners.push_back(MinerConfig<Num>{static_cast<MinerId>(i), shares[i] * total, strategies[i]});
  }
  return miners;
}

template <class Num>
struct EpochResult {
  std::uint64_t epoch_index = 0;
  BlockStore store;
  Chain main;
  EpochStats<Num> stats;
  AllocationMap<Num> allocations;
  Payout<Num> payout;
  std::map<MinerId, Num> balances;
  Num external_total{};
  Num user_payout{};
  Num minted_total{};
  std::uint64_t steps = 0;
  std::uint64_t publication_rounds = 0;
  /// The epoch-start main chain is still a prefix of the final main chain.
  bool prefix_held = true;
  std::vector<std::string> warnings;

  /// sum(balances) + users == sum(internal) + minted (rounding aside for inexact Num).
  Num conservation_gap() const {
    Num lhs = user_payout;
    for (const auto& [id, v] : balances) lhs += v;
    Num rhs = minted_total;
    for (const auto& [id, a] : allocations) rhs += a.internal;
    return lhs - rhs;
  }
};

/// Picks miner i with probability external_i / sum(external).
template <class Num>
MinerId select_miner(std::span<const std::pair<MinerId, Num>> external, Rng& rng) {
  double total = 0;
  for (const auto& [id, b] : external) {
    const double v = to_double(b);
    if (v < 0) throw std::invalid_argument("negative external balance");
    total += v;
  }
  if (!(total > 0)) throw StalledError("stalled: no miner has positive external balance");
  const double target = rng.uniform01() * total;
  double acc = 0;
  std::optional<MinerId> last_positive;
  for (const auto& [id, b] : external) {
    const double v = to_double(b);
    if (v <= 0) continue;
    acc += v;
    last_positive = id;
    if (target < acc) return id;
  }
  return *last_positive;
}

namespace detail {

template <class Num>
struct EpochRun {
  const EpochParams<Num>& params;
  const ProtocolSpec<Num>& protocol;
  std::vector<MinerConfig<Num>> miners;  // sorted by id
  std::vector<Allocation<Num>> allocations;
  std::vector<Quota> quotas;
  World world;

  MinerView<Num> view(std::size_t i) const { return MinerView<Num>(world, i, params, allocations[i], quotas[i]); }

  std::uint64_t used_on(std::size_t i, BlockId parent) const {
    switch (protocol.quota_rule()) {
      case QuotaRule::factored_blocks: return world.own_factored_on(parent, i);
      case QuotaRule::all_blocks: return world.own_blocks_on(parent, i);
      case QuotaRule::none: return 0;
    }
    return 0;
  }

  bool can_create(std::size_t i) const {
    if (protocol.quota_rule() != QuotaRule::all_blocks) return true;
    for (BlockId tip : world.global().longest_tips()) {
      if (quotas[i].allows(world.own_blocks_on(tip, i))) return true;
    }
    return false;
  }
};

}  // namespace detail

/// Repeats publish rounds until one yields nothing. Every miner is polled in ascending
/// id order against the storage as it stood at the start of the round. Returns the
/// number of rounds that published at least one block.
template <class Num>
std::uint64_t publication_fixpoint(World& world, std::span<const MinerView<Num>> views,
                                   std::span<const StrategyPtr<Num>> strategies, std::uint64_t round_cap) {
  std::uint64_t rounds = 0;
  for (;;) {
    std::set<BlockId> batch;
    for (std::size_t i = 0; i < views.size(); ++i) {
      for (BlockId id : strategies[i]->publish(views[i])) {
        const auto owner = world.exists(id) ? world.owner_index(id) : std::nullopt;
        if (!owner || *owner != views[i].index()) {
          throw StrategyFault("miner " + std::to_string(views[i].self()) + " published block " + std::to_string(id) +
                              " it does not own");
        }
        if (world.is_published(id) || !batch.insert(id).second) {
          throw StrategyFault("miner " + std::to_string(views[i].self()) + " re-published block " +
                              std::to_string(id));
        }
      }
    }
    if (batch.empty()) return rounds;
    if (++rounds > round_cap) throw NonTerminationError("publication loop exceeded " + std::to_string(round_cap) + " rounds");
    // Ids grow with creation order, so parents precede children within the batch.
    for (BlockId id : batch) {
      try {
        world.publish(id);
      } catch (const StructuralError& e) {
        throw StrategyFault(std::string("invalid publication: ") + e.what());
      }
    }
  }
}

/// One epoch of the block-creation game. Deterministic given the seed: the scheduler
/// draws from stream 0 and miner m from stream m + 1.
template <class Num>
EpochResult<Num> run_epoch(const EpochParams<Num>& params, std::vector<MinerConfig<Num>> miners,
                           const ProtocolSpec<Num>& protocol, std::uint64_t seed,
                           BlockStore initial = BlockStore::with_genesis()) {
  params.validate();
  if (miners.empty()) throw std::invalid_argument("run_epoch needs at least one miner");
  std::sort(miners.begin(), miners.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  std::vector<MinerId> ids;
  for (const auto& m : miners) {
    if (!m.strategy) throw std::invalid_argument("miner " + std::to_string(m.id) + " has no strategy");
    if (m.balance < 0) throw std::invalid_argument("miner " + std::to_string(m.id) + " has negative balance");
    ids.push_back(m.id);
  }

  EpochResult<Num> result;
  const std::uint64_t base_len = initial.main_chain_length();
  if (base_len % params.epoch_len != 0) throw std::invalid_argument("initial main chain is not at an epoch boundary");
  result.epoch_index = base_len / params.epoch_len;
  const Chain initial_main = main_chain(initial);

  detail::EpochRun<Num> run{params, protocol, miners, {}, {}, World(std::move(initial), ids)};

  Num total_balance{};
  for (const auto& m : run.miners) {
    Allocation<Num> a = m.strategy->allocate(m.balance, params);
    if (a.internal < 0 || a.external < 0) {
      throw StrategyFault("miner " + std::to_string(m.id) + " allocated a negative amount");
    }
    const Num diff = a.total() - m.balance;
    if (NumTraits<Num>::exact ? diff != 0 : std::abs(to_double(diff)) > 1e-9 * (1 + std::abs(to_double(m.balance)))) {
      throw StrategyFault("miner " + std::to_string(m.id) + " allocation does not sum to her balance");
    }
    run.allocations.push_back(a);
    run.quotas.push_back(protocol.quota_for(a, params));
    result.allocations[m.id] = a;
    result.external_total += a.external;
    total_balance += m.balance;
  }
  if (to_double(total_balance) > params.max_miner_user_ratio * to_double(params.user_balance)) {
    result.warnings.push_back("miner balance is not negligible next to user balance (ratio " +
                              std::to_string(to_double(total_balance) / to_double(params.user_balance)) + ")");
  }

  Rng scheduler = Rng(seed).split(0);
  std::vector<Rng> miner_rngs;
  std::vector<StrategyPtr<Num>> strategies;
  for (const auto& m : run.miners) {
    miner_rngs.push_back(Rng(seed).split(1 + static_cast<std::uint64_t>(m.id)));
    strategies.push_back(m.strategy);
  }
  std::vector<MinerView<Num>> views;
  for (std::size_t i = 0; i < run.miners.size(); ++i) views.push_back(run.view(i));

  const std::uint64_t target = base_len + params.epoch_len;
  const std::uint64_t round_cap = params.epoch_len * run.miners.size();
  const std::uint64_t step_cap = 1000 * params.epoch_len + 1000;
  std::vector<std::pair<MinerId, Num>> eligible;

  while (run.world.global().main_chain_length() < target) {
    if (++result.steps > step_cap) throw NonTerminationError("epoch did not conclude within " + std::to_string(step_cap) + " steps");

    eligible.clear();
    for (std::size_t i = 0; i < run.miners.size(); ++i) {
      if (run.can_create(i)) eligible.emplace_back(run.miners[i].id, run.allocations[i].external);
    }
    if (eligible.empty()) throw StalledError("stalled: every miner has exhausted her block quota");
    const MinerId chosen = select_miner<Num>(eligible, scheduler);
    const std::size_t i = run.world.miner_index(chosen);

    const BlockRequest req = strategies[i]->generate_block(views[i], miner_rngs[i]);
    if (!run.world.exists(req.parent)) {
      throw StrategyFault("miner " + std::to_string(chosen) + " pointed to unknown block " + std::to_string(req.parent));
    }
    if (!run.world.is_published(req.parent) && run.world.owner_index(req.parent) != i) {
      throw StrategyFault("miner " + std::to_string(chosen) + " pointed to another miner's private block");
    }
    if (!protocol.block_valid(req.kind, run.used_on(i, req.parent), run.quotas[i])) {
      throw StrategyFault("miner " + std::to_string(chosen) + " created an invalid " + to_string(req.kind) +
                          " block (quota exceeded or kind not allowed)");
    }
    run.world.create(i, req.parent, req.kind);
    result.publication_rounds += publication_fixpoint<Num>(run.world, views, strategies, round_cap);
  }

  result.store = run.world.global();
  result.main = main_chain(result.store);
  result.prefix_held = initial_main.is_prefix_of(result.main);
  if (!result.prefix_held) result.warnings.push_back("epoch-start main chain is no longer a prefix of the main chain");
  result.stats = epoch_stats(result.main, result.epoch_index, params);
  result.payout = protocol.balance(result.main, result.epoch_index, params, result.allocations);
  result.balances = result.payout.miner_totals();
  for (const auto& m : run.miners) result.balances.try_emplace(m.id, Num{});
  result.user_payout = result.payout.users;
  result.minted_total = result.payout.minted_total() +
                        (protocol.kind == ProtocolKind::prd
                             ? Num(from_int<Num>(static_cast<long long>(params.epoch_len)) * params.rho * params.mint_per_block)
                             : Num{});
  return result;
}

struct MinerSummary {
  MinerId id = 0;
  double mean_utility = 0;
  double variance = 0;
  double stderr_utility = 0;
  double mean_blocks = 0;
  double mean_weight = 0;
  double external_spend = 0;
  double mean_real_value = 0;
};

struct RunRecord {
  std::uint64_t run = 0;
  MinerId miner = 0;
  std::uint64_t blocks = 0;
  double weight = 0;
  double balance = 0;
  double real_value = 0;
};

struct GamesSummary {
  std::uint64_t runs = 0;
  std::vector<MinerSummary> miners;
  std::vector<RunRecord> records;
  std::vector<std::string> warnings;
};

/// Seed of run `index` in a batch with master seed `seed`.
inline std::uint64_t run_seed(std::uint64_t seed, std::uint64_t index) { return derive_seed(seed, 0x5eed0000ULL + index); }

/// Plays `count` independent epochs. Runs may execute on `jobs` threads; results are
/// reduced in run order, so the output does not depend on `jobs`.
template <class Num>
GamesSummary run_games(const EpochParams<Num>& params, const std::vector<MinerConfig<Num>>& miners,
                       const ProtocolSpec<Num>& protocol, std::uint64_t count, std::uint64_t seed,
                       unsigned jobs = 1) {
  if (count == 0) throw std::invalid_argument("run_games needs count >= 1");
  std::vector<std::vector<RunRecord>> per_run(count);
  std::vector<std::string> first_warnings;
  std::atomic<std::uint64_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  std::uint64_t failure_run = count;
  const double real_factor = to_double(protocol.real_value_factor(params));

  auto worker = [&] {
    for (;;) {
      const std::uint64_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        auto res = run_epoch(params, miners, protocol, run_seed(seed, r));
        std::vector<RunRecord> recs;
        for (const auto& [id, bal] : res.balances) {
          RunRecord rec{r, id, 0, 0, to_double(bal), to_double(bal) * real_factor};
          if (auto it = res.stats.find(id); it != res.stats.end()) {
            rec.blocks = it->second.blocks;
            rec.weight = to_double(it->second.weight);
          }
          recs.push_back(rec);
        }
        std::lock_guard lock(mu);
        per_run[r] = std::move(recs);
        if (r == 0) first_warnings = res.warnings;
      } catch (...) {
        std::lock_guard lock(mu);
        if (r < failure_run) {
          failure_run = r;
          failure = std::current_exception();
        }
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  GamesSummary summary;
  summary.runs = count;
  summary.warnings = first_warnings;
  std::map<MinerId, std::vector<const RunRecord*>> by_miner;
  for (const auto& recs : per_run) {
    for (const auto& rec : recs) {
      summary.records.push_back(rec);
      by_miner[rec.miner].push_back(&summary.records.back());
    }
  }
  // records reallocated while filling; rebuild the index over the final vector.
  by_miner.clear();
  for (const auto& rec : summary.records) by_miner[rec.miner].push_back(&rec);

  std::map<MinerId, double> external;
  for (const auto& m : miners) external[m.id] = to_double(m.strategy->allocate(m.balance, params).external);

  for (const auto& [id, recs] : by_miner) {
    MinerSummary s;
    s.id = id;
    const double n = static_cast<double>(recs.size());
    for (const auto* r : recs) {
      s.mean_utility += r->balance;
      s.mean_blocks += static_cast<double>(r->blocks);
      s.mean_weight += r->weight;
      s.mean_real_value += r->real_value;
    }
    s.mean_utility /= n;
    s.mean_blocks /= n;
    s.mean_weight /= n;
    s.mean_real_value /= n;
    double ss = 0;
    for (const auto* r : recs) ss += (r->balance - s.mean_utility) * (r->balance - s.mean_utility);
    s.variance = recs.size() > 1 ? ss / (n - 1) : 0.0;
    s.stderr_utility = std::sqrt(s.variance / n);
    s.external_spend = external[id];
    summary.miners.push_back(s);
  }
  return summary;
}

}  // namespace heb
