#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "heb/numeric.hpp"

namespace heb {

using BlockId = std::uint64_t;
using MinerId = std::uint32_t;

enum class BlockKind : std::uint8_t { regular, factored };

inline const char* to_string(BlockKind kind) { return kind == BlockKind::factored ? "factored" : "regular"; }

inline BlockKind parse_block_kind(std::string_view s) {
  if (s == "regular") return BlockKind::regular;
  if (s == "factored") return BlockKind::factored;
  throw std::invalid_argument("unknown block kind: " + std::string(s));
}

struct Block {
  BlockId id = 0;
  std::optional<BlockId> parent;  // none only for genesis
  std::optional<MinerId> creator;  // none only for genesis
  BlockKind kind = BlockKind::regular;
  std::uint64_t height = 0;

  bool is_genesis() const { return !parent.has_value(); }
  friend bool operator==(const Block&, const Block&) = default;
};

/// Raised when an append would break the storage tree.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only block tree rooted at genesis. Blocks are never removed or mutated.
class BlockStore {
 public:
  BlockStore() = default;

  static BlockStore with_genesis(BlockId genesis_id = 0) {
    BlockStore store;
    store.append(Block{genesis_id, std::nullopt, std::nullopt, BlockKind::regular, 0});
    return store;
  }

  void append(const Block& block) {
    if (index_.contains(block.id)) throw StructuralError("duplicate id " + std::to_string(block.id));
    if (block.is_genesis()) {
      if (!blocks_.empty()) throw StructuralError("second genesis " + std::to_string(block.id));
      if (block.height != 0) throw StructuralError("genesis height must be 0");
    } else {
      auto it = index_.find(*block.parent);
      if (it == index_.end()) {
        throw StructuralError("missing parent " + std::to_string(*block.parent) + " for block " +
                              std::to_string(block.id));
      }
      if (block.height != blocks_[it->second].height + 1) {
        throw StructuralError("bad height for block " + std::to_string(block.id));
      }
      if (!block.creator) throw StructuralError("non-genesis block without creator");
    }
    index_.emplace(block.id, blocks_.size());
    blocks_.push_back(block);
    if (block.height > max_height_ || tips_.empty()) {
      max_height_ = block.height;
      tips_.clear();
    }
    if (block.height == max_height_) tips_.push_back(block.id);
  }

  bool empty() const { return blocks_.empty(); }
  std::size_t size() const { return blocks_.size(); }
  bool contains(BlockId id) const { return index_.contains(id); }

  const Block& at(BlockId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown block " + std::to_string(id));
    return blocks_[it->second];
  }

  const Block& genesis() const { return blocks_.at(0); }

  /// Insertion order (parents precede children).
  std::span<const Block> blocks() const { return blocks_; }

  std::uint64_t max_height() const { return max_height_; }

  /// Tips of all longest chains, in insertion order.
  std::span<const BlockId> longest_tips() const { return tips_; }

  /// Block ids from genesis to `tip` inclusive.
  std::vector<BlockId> path_to(BlockId tip) const {
    std::vector<BlockId> path;
    path.reserve(at(tip).height + 1);
    std::optional<BlockId> cur = tip;
    while (cur) {
      path.push_back(*cur);
      cur = at(*cur).parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Tip of the longest common prefix of all longest chains.
  BlockId main_tip() const {
    if (blocks_.empty()) throw std::logic_error("main_tip on empty store");
    std::vector<BlockId> cursor(tips_.begin(), tips_.end());
    auto all_equal = [&] {
      return std::all_of(cursor.begin(), cursor.end(), [&](BlockId b) { return b == cursor.front(); });
    };
    while (!all_equal()) {
      for (auto& b : cursor) b = *at(b).parent;
    }
    return cursor.front();
  }

  std::uint64_t main_chain_length() const { return at(main_tip()).height; }

  bool is_ancestor(BlockId ancestor, BlockId descendant) const {
    const auto target_height = at(ancestor).height;
    std::optional<BlockId> cur = descendant;
    while (cur && at(*cur).height > target_height) cur = at(*cur).parent;
    return cur && *cur == ancestor;
  }

 private:
  std::vector<Block> blocks_;
  std::unordered_map<BlockId, std::size_t> index_;
  std::vector<BlockId> tips_;
  std::uint64_t max_height_ = 0;
};

/// A path from genesis. `blocks[0]` is genesis.
struct Chain {
  std::vector<Block> blocks;

  std::size_t length() const { return blocks.empty() ? 0 : blocks.size() - 1; }
  const Block& last() const { return blocks.back(); }

  bool is_prefix_of(const Chain& other) const {
    if (blocks.size() > other.blocks.size()) return false;
    return std::equal(blocks.begin(), blocks.end(), other.blocks.begin());
  }
  friend bool operator==(const Chain&, const Chain&) = default;
};

inline Chain chain_to(const BlockStore& store, BlockId tip) {
  Chain chain;
  for (BlockId id : store.path_to(tip)) chain.blocks.push_back(store.at(id));
  return chain;
}

inline std::vector<Chain> longest_chains(const BlockStore& store) {
  std::vector<Chain> out;
  for (BlockId tip : store.longest_tips()) out.push_back(chain_to(store, tip));
  return out;
}

inline Chain main_chain(const BlockStore& store) { return chain_to(store, store.main_tip()); }

/// Epoch parameters: l (epoch_len), phi (factor), rho, R (mint_per_block), B_U (user_balance).
template <class Num>
struct EpochParams {
  std::uint64_t epoch_len = 1000;
  Num factor = from_int<Num>(20);
  Num rho = from_decimal<Num>("0.5");
  Num mint_per_block = from_int<Num>(1);
  Num user_balance = from_decimal<Num>("1e9");
  /// Largest tolerated ratio of total miner balance to user balance.
  double max_miner_user_ratio = 1e-3;

  void validate() const {
    if (epoch_len == 0) throw std::invalid_argument("epoch_len must be positive");
    if (factor < 1) throw std::invalid_argument("factor must be >= 1");
    if (rho < 0 || !(rho < 1)) throw std::invalid_argument("rho must lie in [0, 1)");
    if (!(mint_per_block > 0)) throw std::invalid_argument("mint_per_block must be positive");
    if (!(user_balance > 0)) throw std::invalid_argument("user_balance must be positive");
  }

  Num weight(BlockKind kind) const { return kind == BlockKind::factored ? factor : from_int<Num>(1); }
};

inline std::span<const Block> epoch_slice(const Chain& chain, std::uint64_t k, std::uint64_t epoch_len) {
  if (epoch_len == 0) throw std::invalid_argument("epoch_len must be positive");
  const std::uint64_t end = epoch_len * (k + 1);
  if (chain.length() < end) {
    throw std::out_of_range("chain too short for epoch " + std::to_string(k) + ": length " +
                            std::to_string(chain.length()) + " < " + std::to_string(end));
  }
  return std::span<const Block>(chain.blocks).subspan(epoch_len * k + 1, epoch_len);
}

template <class Num>
struct MinerEpochStats {
  std::uint64_t blocks = 0;
  std::uint64_t factored = 0;
  std::uint64_t regular = 0;
  Num weight{};
};

template <class Num>
using EpochStats = std::map<MinerId, MinerEpochStats<Num>>;

template <class Num>
EpochStats<Num> epoch_stats(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params) {
  EpochStats<Num> stats;
  for (const Block& b : epoch_slice(chain, k, params.epoch_len)) {
    auto& s = stats[*b.creator];
    ++s.blocks;
    if (b.kind == BlockKind::factored) {
      ++s.factored;
    } else {
      ++s.regular;
    }
  }
  for (auto& [id, s] : stats) s.weight = from_int<Num>(static_cast<long long>(s.factored)) * params.factor +
                                         from_int<Num>(static_cast<long long>(s.regular));
  return stats;
}

}  // namespace heb
