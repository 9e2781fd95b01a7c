#pragma once

#include <memory>
#include <string>
#include <vector>

#include "heb/rng.hpp"
#include "heb/world.hpp"

namespace heb {

struct BlockRequest {
  BlockId parent = 0;
  BlockKind kind = BlockKind::regular;
};

/// Allocate / GenerateBlock / Publish. Implementations are stateless; everything they
/// need is in the view, so one instance can serve many miners and parallel runs.
template <class Num>
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  virtual Allocation<Num> allocate(const Num& balance, const EpochParams<Num>& params) const = 0;
  virtual BlockRequest generate_block(const MinerView<Num>& view, Rng& rng) const = 0;
  virtual std::vector<BlockId> publish(const MinerView<Num>& view) const = 0;
};

template <class Num>
using StrategyPtr = std::shared_ptr<const Strategy<Num>>;

namespace detail {

inline BlockId uniform_tip(std::span<const BlockId> tips, Rng& rng) {
  if (tips.size() == 1) return tips.front();
  return tips[rng.index(tips.size())];
}

template <class Num>
std::vector<BlockId> publish_all(const MinerView<Num>& view) {
  auto pending = view.unpublished();
  return {pending.begin(), pending.end()};
}

template <class Num>
Allocation<Num> split_by_rho(const Num& balance, const EpochParams<Num>& params) {
  Num internal = params.rho * balance;
  return {internal, balance - internal};
}

template <class Num>
BlockKind heb_kind(const MinerView<Num>& view, BlockId parent) {
  if (view.params().rho == 0) return BlockKind::factored;
  return view.quota().allows(view.own_factored_on(parent)) ? BlockKind::factored : BlockKind::regular;
}

}  // namespace detail

/// Nakamoto: everything external, extend a uniformly chosen longest chain, publish at once.
template <class Num>
class NakamotoPrescribed final : public Strategy<Num> {
 public:
  std::string name() const override { return "prescribed"; }
  Allocation<Num> allocate(const Num& balance, const EpochParams<Num>&) const override { return {Num{}, balance}; }
  BlockRequest generate_block(const MinerView<Num>& view, Rng& rng) const override {
    return {detail::uniform_tip(view.longest_tips(), rng), BlockKind::regular};
  }
  std::vector<BlockId> publish(const MinerView<Num>& view) const override { return detail::publish_all(view); }
};

/// HEB: allocate rho internally, factored blocks while the per-chain quota lasts.
template <class Num>
class HebPrescribed final : public Strategy<Num> {
 public:
  std::string name() const override { return "prescribed"; }
  Allocation<Num> allocate(const Num& balance, const EpochParams<Num>& params) const override {
    return detail::split_by_rho(balance, params);
  }
  BlockRequest generate_block(const MinerView<Num>& view, Rng& rng) const override {
    const BlockId parent = detail::uniform_tip(view.longest_tips(), rng);
    return {parent, detail::heb_kind(view, parent)};
  }
  std::vector<BlockId> publish(const MinerView<Num>& view) const override { return detail::publish_all(view); }
};

/// Like HebPrescribed, but ties between longest chains go to the lightest ones.
template <class Num>
class PettyCompliant final : public Strategy<Num> {
 public:
  std::string name() const override { return "petty_compliant"; }
  Allocation<Num> allocate(const Num& balance, const EpochParams<Num>& params) const override {
    return detail::split_by_rho(balance, params);
  }
  BlockRequest generate_block(const MinerView<Num>& view, Rng& rng) const override {
    auto tips = view.longest_tips();
    BlockId parent = tips.front();
    if (tips.size() > 1) {
      std::vector<BlockId> lightest;
      Num best{};
      for (BlockId tip : tips) {
        Num w = view.chain_weight(tip);
        if (lightest.empty() || w < best) {
          best = w;
          lightest.assign(1, tip);
        } else if (w == best) {
          lightest.push_back(tip);
        }
      }
      parent = detail::uniform_tip(lightest, rng);
    }
    return {parent, detail::heb_kind(view, parent)};
  }
  std::vector<BlockId> publish(const MinerView<Num>& view) const override { return detail::publish_all(view); }
};

/// Spend everything externally, mine regular blocks privately on the own tip and
/// release them only once a full epoch's worth exists.
template <class Num>
class PowOnly final : public Strategy<Num> {
 public:
  std::string name() const override { return "pow_only"; }
  Allocation<Num> allocate(const Num& balance, const EpochParams<Num>&) const override { return {Num{}, balance}; }
  BlockRequest generate_block(const MinerView<Num>& view, Rng&) const override {
    return {view.last_created().value_or(view.world().epoch_base()), BlockKind::regular};
  }
  std::vector<BlockId> publish(const MinerView<Num>& view) const override {
    if (view.unpublished().size() < view.params().epoch_len) return {};
    return detail::publish_all(view);
  }
};

/// Prescribed HEB behaviour for a miner who could not obtain internal tokens.
template <class Num>
class NoInternalCurrency final : public Strategy<Num> {
 public:
  std::string name() const override { return "no_ic"; }
  Allocation<Num> allocate(const Num& balance, const EpochParams<Num>&) const override { return {Num{}, balance}; }
  BlockRequest generate_block(const MinerView<Num>& view, Rng& rng) const override {
    return {detail::uniform_tip(view.longest_tips(), rng), BlockKind::regular};
  }
  std::vector<BlockId> publish(const MinerView<Num>& view) const override { return detail::publish_all(view); }
};

/// Mandatory-expenditure protocol: single block type; every block consumes quota.
template <class Num>
class MandatoryPrescribed final : public Strategy<Num> {
 public:
  std::string name() const override { return "prescribed"; }
  Allocation<Num> allocate(const Num& balance, const EpochParams<Num>& params) const override {
    return detail::split_by_rho(balance, params);
  }
  BlockRequest generate_block(const MinerView<Num>& view, Rng& rng) const override {
    std::vector<BlockId> open;
    for (BlockId tip : view.longest_tips()) {
      if (view.quota().allows(view.own_blocks_on(tip))) open.push_back(tip);
    }
    // With no open chain any block is invalid; the engine refuses to select such miners.
    if (open.empty()) return {view.longest_tips().front(), BlockKind::regular};
    return {detail::uniform_tip(open, rng), BlockKind::regular};
  }
  std::vector<BlockId> publish(const MinerView<Num>& view) const override { return detail::publish_all(view); }
};

}  // namespace heb
