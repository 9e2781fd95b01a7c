#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "heb/chain.hpp"
#include "heb/strategy.hpp"

namespace heb {

enum class ProtocolKind { nakamoto, nakamoto_half, prd, heb, heb_mandatory };

/// Which blocks count against a miner's per-chain quota.
enum class QuotaRule { none, factored_blocks, all_blocks };

template <class Num>
using AllocationMap = std::map<MinerId, Allocation<Num>>;

/// End-of-epoch token assignment. Miners' totals are minted + redistributed + retained;
/// `retained` is internal allocation a protocol does not consume.
template <class Num>
struct Payout {
  std::map<MinerId, Num> minted;
  std::map<MinerId, Num> redistributed;
  std::map<MinerId, Num> retained;
  Num users{};

  Num miner_total(MinerId id) const {
    Num t{};
    if (auto it = minted.find(id); it != minted.end()) t += it->second;
    if (auto it = redistributed.find(id); it != redistributed.end()) t += it->second;
    if (auto it = retained.find(id); it != retained.end()) t += it->second;
    return t;
  }

  std::map<MinerId, Num> miner_totals() const {
    std::map<MinerId, Num> out;
    for (const auto* part : {&minted, &redistributed, &retained}) {
      for (const auto& [id, v] : *part) out[id] += v;
    }
    return out;
  }

  Num minted_total() const {
    Num t{};
    for (const auto& [id, v] : minted) t += v;
    return t;
  }
};

template <class Num>
std::map<MinerId, Num> nakamoto_balance(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params) {
  std::map<MinerId, Num> out;
  for (const auto& [id, s] : epoch_stats(chain, k, params)) {
    out[id] = from_int<Num>(static_cast<long long>(s.blocks)) * params.mint_per_block;
  }
  return out;
}

template <class Num>
std::map<MinerId, Num> nakamoto_half_balance(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params) {
  auto out = nakamoto_balance(chain, k, params);
  for (auto& [id, v] : out) v /= 2;
  return out;
}

namespace detail {

/// Pro-rata split of `pool` among internal-token holders (miners by allocation) and users.
template <class Num>
void redistribute(Payout<Num>& payout, const Num& pool, const AllocationMap<Num>& allocations,
                  const EpochParams<Num>& params) {
  Num internal_total{};
  for (const auto& [id, a] : allocations) internal_total += a.internal;
  const Num holders = internal_total + params.user_balance;
  Num given{};
  for (const auto& [id, a] : allocations) {
    Num share = pool == 0 ? Num{} : Num(a.internal * pool / holders);
    payout.redistributed[id] = share;
    given += share;
  }
  payout.users = pool - given;
}

}  // namespace detail

/// Minted tokens proportional to epoch block weight, plus the epoch's internal
/// expenditure shared among all token holders.
template <class Num>
Payout<Num> heb_balance(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params,
                        const AllocationMap<Num>& allocations) {
  const auto stats = epoch_stats(chain, k, params);
  Num total_weight{};
  for (const auto& [id, s] : stats) total_weight += s.weight;
  if (!(total_weight > 0)) throw std::logic_error("heb_balance: epoch has no block weight");
  const Num minted_pool = from_int<Num>(static_cast<long long>(params.epoch_len)) * params.mint_per_block;

  Payout<Num> payout;
  for (const auto& [id, s] : stats) payout.minted[id] = s.weight * minted_pool / total_weight;
  Num internal_total{};
  for (const auto& [id, a] : allocations) internal_total += a.internal;
  detail::redistribute(payout, internal_total, allocations, params);
  return payout;
}

/// Mandatory-expenditure protocol: HEB accounting with a single unit-weight block type.
template <class Num>
Payout<Num> mandatory_balance(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params,
                              const AllocationMap<Num>& allocations) {
  EpochParams<Num> unit = params;
  unit.factor = from_int<Num>(1);
  return heb_balance(chain, k, unit, allocations);
}

/// Creator keeps (1 - rho) R per block; rho R per block goes to all token holders.
template <class Num>
Payout<Num> prd_balance(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params,
                        const AllocationMap<Num>& allocations) {
  Payout<Num> payout;
  const Num keep = (from_int<Num>(1) - params.rho) * params.mint_per_block;
  for (const auto& [id, s] : epoch_stats(chain, k, params)) {
    payout.minted[id] = from_int<Num>(static_cast<long long>(s.blocks)) * keep;
  }
  const Num pool = from_int<Num>(static_cast<long long>(params.epoch_len)) * params.rho * params.mint_per_block;
  detail::redistribute(payout, pool, allocations, params);
  for (const auto& [id, a] : allocations) payout.retained[id] = a.internal;
  return payout;
}

/// A block is valid under the mandatory protocol iff its creator has quota left on that chain.
inline bool mandatory_validity(BlockKind kind, std::uint64_t own_blocks_on_chain, Quota quota) {
  return kind == BlockKind::regular && quota.allows(own_blocks_on_chain);
}

inline bool heb_validity(BlockKind kind, std::uint64_t own_factored_on_chain, Quota quota) {
  return kind == BlockKind::regular || quota.allows(own_factored_on_chain);
}

template <class Num>
struct ProtocolSpec {
  std::string name;
  ProtocolKind kind = ProtocolKind::nakamoto;
  StrategyPtr<Num> prescribed;

  Num mint_per_block(const EpochParams<Num>& params) const {
    return kind == ProtocolKind::nakamoto_half ? Num(params.mint_per_block / 2) : params.mint_per_block;
  }

  /// Tokens minted in one epoch.
  Num minted_per_epoch(const EpochParams<Num>& params) const {
    return from_int<Num>(static_cast<long long>(params.epoch_len)) * mint_per_block(params);
  }

  /// Real-value multiplier of one token relative to a full-rate protocol (price ~ 1/supply).
  Num real_value_factor(const EpochParams<Num>& params) const {
    return params.mint_per_block / mint_per_block(params);
  }

  QuotaRule quota_rule() const {
    switch (kind) {
      case ProtocolKind::heb: return QuotaRule::factored_blocks;
      case ProtocolKind::heb_mandatory: return QuotaRule::all_blocks;
      default: return QuotaRule::none;
    }
  }

  /// floor(internal / (rho R)) quota-consuming blocks per chain; unlimited when rho = 0.
  Quota quota_for(const Allocation<Num>& allocation, const EpochParams<Num>& params) const {
    if (quota_rule() == QuotaRule::none) return Quota::unlimited();
    if (params.rho == 0) return Quota::unlimited();
    const long long n = floor_count<Num>(allocation.internal / (params.rho * params.mint_per_block));
    return Quota::of(static_cast<std::uint64_t>(n < 0 ? 0 : n));
  }

  /// `used` counts the creator's quota-consuming blocks already on the target chain.
  bool block_valid(BlockKind block_kind, std::uint64_t used, Quota quota) const {
    switch (kind) {
      case ProtocolKind::heb: return heb_validity(block_kind, used, quota);
      case ProtocolKind::heb_mandatory: return mandatory_validity(block_kind, used, quota);
      default: return block_kind == BlockKind::regular;
    }
  }

  /// Whether internal allocations are spent (and redistributed) by the protocol.
  bool consumes_internal() const { return kind == ProtocolKind::heb || kind == ProtocolKind::heb_mandatory; }

  Payout<Num> balance(const Chain& chain, std::uint64_t k, const EpochParams<Num>& params,
                      const AllocationMap<Num>& allocations) const {
    switch (kind) {
      case ProtocolKind::heb: return heb_balance(chain, k, params, allocations);
      case ProtocolKind::heb_mandatory: return mandatory_balance(chain, k, params, allocations);
      case ProtocolKind::prd: return prd_balance(chain, k, params, allocations);
      case ProtocolKind::nakamoto:
      case ProtocolKind::nakamoto_half: {
        Payout<Num> payout;
        payout.minted = kind == ProtocolKind::nakamoto ? nakamoto_balance(chain, k, params)
                                                       : nakamoto_half_balance(chain, k, params);
        for (const auto& [id, a] : allocations) payout.retained[id] = a.internal;
        return payout;
      }
    }
    throw std::logic_error("unknown protocol");
  }
};

inline ProtocolKind parse_protocol_kind(std::string_view name) {
  if (name == "nakamoto") return ProtocolKind::nakamoto;
  if (name == "nakamoto_half") return ProtocolKind::nakamoto_half;
  if (name == "prd") return ProtocolKind::prd;
  if (name == "heb") return ProtocolKind::heb;
  if (name == "heb_mandatory") return ProtocolKind::heb_mandatory;
  throw std::invalid_argument("unknown protocol: " + std::string(name));
}

inline const char* to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::nakamoto: return "nakamoto";
    case ProtocolKind::nakamoto_half: return "nakamoto_half";
    case ProtocolKind::prd: return "prd";
    case ProtocolKind::heb: return "heb";
    case ProtocolKind::heb_mandatory: return "heb_mandatory";
  }
  return "?";
}

template <class Num>
ProtocolSpec<Num> make_protocol(ProtocolKind kind) {
  ProtocolSpec<Num> spec;
  spec.kind = kind;
  spec.name = to_string(kind);
  switch (kind) {
    case ProtocolKind::heb: spec.prescribed = std::make_shared<HebPrescribed<Num>>(); break;
    case ProtocolKind::heb_mandatory: spec.prescribed = std::make_shared<MandatoryPrescribed<Num>>(); break;
    default: spec.prescribed = std::make_shared<NakamotoPrescribed<Num>>(); break;
  }
  return spec;
}

template <class Num>
ProtocolSpec<Num> make_protocol(std::string_view name) {
  return make_protocol<Num>(parse_protocol_kind(name));
}

inline const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"prescribed", "petty_compliant", "pow_only", "no_ic"};
  return names;
}

/// Strategy by configuration name; "prescribed" resolves against the protocol.
template <class Num>
StrategyPtr<Num> make_strategy(std::string_view name, const ProtocolSpec<Num>& protocol) {
  if (name == "prescribed") return protocol.prescribed;
  if (name == "petty_compliant") return std::make_shared<PettyCompliant<Num>>();
  if (name == "pow_only") return std::make_shared<PowOnly<Num>>();
  if (name == "no_ic") return std::make_shared<NoInternalCurrency<Num>>();
  throw std::invalid_argument("unknown strategy: " + std::string(name));
}

}  // namespace heb
