#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "heb/chain.hpp"

namespace heb {

/// A miner's split of her balance into internal (system token) and external spend.
template <class Num>
struct Allocation {
  Num internal{};
  Num external{};

  Num total() const { return internal + external; }
  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Per-chain cap on quota-consuming blocks; no limit when `limit` is empty.
struct Quota {
  std::optional<std::uint64_t> limit;

  static Quota unlimited() { return Quota{}; }
  static Quota of(std::uint64_t n) { return Quota{n}; }

  bool allows(std::uint64_t used) const { return !limit || used < *limit; }
};

/// Everything a miner can observe during an epoch: the global storage plus her own
/// local storage. Also tracks, for each block created this epoch, how many blocks of
/// each kind every miner has on the chain ending at it (epoch-relative).
class World {
 public:
  World(BlockStore initial, std::vector<MinerId> miners) : global_(std::move(initial)), miners_(std::move(miners)) {
    if (global_.empty()) throw std::invalid_argument("initial store must contain genesis");
    std::sort(miners_.begin(), miners_.end());
    if (std::adjacent_find(miners_.begin(), miners_.end()) != miners_.end()) {
      throw std::invalid_argument("duplicate miner id");
    }
    base_ = global_.main_tip();
    BlockId max_id = 0;
    for (const Block& b : global_.blocks()) max_id = std::max(max_id, b.id);
    first_new_id_ = max_id + 1;
    local_.resize(miners_.size());
    last_created_.resize(miners_.size());
  }

  const BlockStore& global() const { return global_; }
  std::span<const MinerId> miners() const { return miners_; }
  BlockId epoch_base() const { return base_; }
  std::uint64_t epoch_base_height() const { return global_.at(base_).height; }

  std::size_t miner_index(MinerId id) const {
    auto it = std::lower_bound(miners_.begin(), miners_.end(), id);
    if (it == miners_.end() || *it != id) throw std::out_of_range("unknown miner " + std::to_string(id));
    return static_cast<std::size_t>(it - miners_.begin());
  }

  bool exists(BlockId id) const { return is_new(id) ? id - first_new_id_ < created_.size() : global_.contains(id); }

  const Block& block(BlockId id) const { return is_new(id) ? created_.at(id - first_new_id_) : global_.at(id); }

  bool is_published(BlockId id) const { return global_.contains(id); }

  /// Creator index of an epoch block, or nullopt for pre-existing blocks.
  std::optional<std::size_t> owner_index(BlockId id) const {
    if (!is_new(id)) return std::nullopt;
    return miner_index(*block(id).creator);
  }

  std::span<const BlockId> unpublished(std::size_t miner) const { return local_.at(miner); }
  std::optional<BlockId> last_created(std::size_t miner) const { return last_created_.at(miner); }

  std::uint32_t own_factored_on(BlockId tip, std::size_t miner) const { return stat(tip, 2 * miner); }
  std::uint32_t own_blocks_on(BlockId tip, std::size_t miner) const { return stat(tip, 2 * miner + 1); }
  std::uint32_t chain_factored(BlockId tip) const { return stat(tip, 2 * miners_.size()); }
  std::uint32_t chain_regular(BlockId tip) const { return stat(tip, 2 * miners_.size() + 1); }

  /// Accumulated epoch weight of the chain ending at `tip`.
  template <class Num>
  Num chain_weight(BlockId tip, const Num& factor) const {
    return from_int<Num>(chain_factored(tip)) * factor + from_int<Num>(chain_regular(tip));
  }

  /// Adds a block to miner `miner`'s local storage. The caller validates the request.
  BlockId create(std::size_t miner, BlockId parent, BlockKind kind) {
    const BlockId id = first_new_id_ + created_.size();
    const Block& p = block(parent);
    created_.push_back(Block{id, parent, miners_.at(miner), kind, p.height + 1});
    const std::size_t stride = stride_();
    const std::size_t off = stats_.size();
    stats_.resize(off + stride, 0);
    if (is_new(parent)) {
      const std::size_t poff = (parent - first_new_id_) * stride;
      std::copy_n(stats_.begin() + static_cast<std::ptrdiff_t>(poff), stride,
                  stats_.begin() + static_cast<std::ptrdiff_t>(off));
    }
    if (kind == BlockKind::factored) {
      ++stats_[off + 2 * miner];
      ++stats_[off + 2 * miners_.size()];
    } else {
      ++stats_[off + 2 * miners_.size() + 1];
    }
    ++stats_[off + 2 * miner + 1];
    local_[miner].push_back(id);
    last_created_[miner] = id;
    return id;
  }

  /// Copies a block from its creator's local storage to the global storage.
  void publish(BlockId id) {
    const auto owner = owner_index(id);
    if (!owner) throw StructuralError("block " + std::to_string(id) + " is not an epoch block");
    auto& local = local_[*owner];
    auto it = std::find(local.begin(), local.end(), id);
    if (it == local.end()) throw StructuralError("block " + std::to_string(id) + " already published");
    global_.append(block(id));
    local.erase(it);
  }

  std::span<const Block> created() const { return created_; }

 private:
  bool is_new(BlockId id) const { return id >= first_new_id_; }
  std::size_t stride_() const { return 2 * miners_.size() + 2; }
  std::uint32_t stat(BlockId tip, std::size_t slot) const {
    if (!is_new(tip)) return 0;
    return stats_.at((tip - first_new_id_) * stride_() + slot);
  }

  BlockStore global_;
  std::vector<MinerId> miners_;
  BlockId base_ = 0;
  BlockId first_new_id_ = 1;
  std::vector<Block> created_;
  std::vector<std::uint32_t> stats_;
  std::vector<std::vector<BlockId>> local_;
  std::vector<std::optional<BlockId>> last_created_;
};

/// What a strategy sees when invoked: the world from one miner's point of view.
template <class Num>
class MinerView {
 public:
  MinerView(const World& world, std::size_t index, const EpochParams<Num>& params, const Allocation<Num>& allocation,
            Quota quota)
      : world_(&world), index_(index), params_(&params), allocation_(&allocation), quota_(quota) {}

  const World& world() const { return *world_; }
  std::size_t index() const { return index_; }
  MinerId self() const { return world_->miners()[index_]; }
  const EpochParams<Num>& params() const { return *params_; }
  const Allocation<Num>& allocation() const { return *allocation_; }
  Quota quota() const { return quota_; }

  std::span<const BlockId> longest_tips() const { return world_->global().longest_tips(); }
  std::span<const BlockId> unpublished() const { return world_->unpublished(index_); }
  std::optional<BlockId> last_created() const { return world_->last_created(index_); }
  std::uint32_t own_factored_on(BlockId tip) const { return world_->own_factored_on(tip, index_); }
  std::uint32_t own_blocks_on(BlockId tip) const { return world_->own_blocks_on(tip, index_); }
  Num chain_weight(BlockId tip) const { return world_->chain_weight(tip, params_->factor); }

 private:
  const World* world_;
  std::size_t index_;
  const EpochParams<Num>* params_;
  const Allocation<Num>* allocation_;
  Quota quota_;
};

}  // namespace heb
