#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "heb/chain.hpp"
#include "heb/mdp.hpp"
#include "heb/sim.hpp"

namespace heb::io {

using nlohmann::json;

/// Doubles as JSON numbers, exact values as "p/q" strings.
template <class Num>
json number(const Num& v) {
  if constexpr (NumTraits<Num>::exact) {
    return NumTraits<Num>::to_string(v);
  } else {
    return v;
  }
}

inline json block_to_json(const Block& b) {
  json j;
  j["id"] = b.id;
  j["parent"] = b.parent ? json(*b.parent) : json(nullptr);
  j["creator"] = b.creator ? json(*b.creator) : json(nullptr);
  j["kind"] = to_string(b.kind);
  j["height"] = b.height;
  return j;
}

inline Block block_from_json(const json& j) {
  Block b;
  b.id = j.at("id").get<BlockId>();
  if (!j.at("parent").is_null()) b.parent = j.at("parent").get<BlockId>();
  if (!j.at("creator").is_null()) b.creator = j.at("creator").get<MinerId>();
  b.kind = parse_block_kind(j.at("kind").get<std::string>());
  b.height = j.at("height").get<std::uint64_t>();
  return b;
}

/// One block per line, in insertion order.
inline void write_store(std::ostream& out, const BlockStore& store) {
  for (const Block& b : store.blocks()) out << block_to_json(b).dump() << '\n';
}

inline std::string store_to_jsonl(const BlockStore& store) {
  std::ostringstream out;
  write_store(out, store);
  return out.str();
}

/// Rebuilds a store through append(), so a corrupt file fails with a StructuralError.
inline BlockStore read_store(std::istream& in) {
  BlockStore store;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    store.append(block_from_json(json::parse(line)));
  }
  return store;
}

template <class Num>
json result_to_json(const EpochResult<Num>& r) {
  json j;
  j["epoch"] = r.epoch_index;
  j["main_length"] = r.main.length();
  j["main_tip"] = r.main.last().id;
  j["store_size"] = r.store.size();
  j["steps"] = r.steps;
  j["prefix_held"] = r.prefix_held;
  j["external_total"] = number(r.external_total);
  j["user_payout"] = number(r.user_payout);
  j["minted_total"] = number(r.minted_total);
  json miners = json::array();
  for (const auto& [id, bal] : r.balances) {
    json m;
    m["id"] = id;
    m["balance"] = number(bal);
    const auto a = r.allocations.at(id);
    m["internal"] = number(a.internal);
    m["external"] = number(a.external);
    std::uint64_t blocks = 0, factored = 0;
    Num weight{};
    if (auto it = r.stats.find(id); it != r.stats.end()) {
      blocks = it->second.blocks;
      factored = it->second.factored;
      weight = it->second.weight;
    }
    m["blocks"] = blocks;
    m["factored"] = factored;
    m["weight"] = number(weight);
    miners.push_back(m);
  }
  j["miners"] = miners;
  j["warnings"] = r.warnings;
  return j;
}

/// Fixed-precision formatting so CSV bytes do not depend on the stream's state.
inline std::string fmt(double v, int precision = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string aggregate_csv(const GamesSummary& s) {
  std::string out = "miner_id,mean_utility,stderr,mean_blocks,mean_weight,external_spend\n";
  for (const auto& m : s.miners) {
    out += std::to_string(m.id) + ',' + fmt(m.mean_utility) + ',' + fmt(m.stderr_utility) + ',' + fmt(m.mean_blocks) +
           ',' + fmt(m.mean_weight) + ',' + fmt(m.external_spend) + '\n';
  }
  return out;
}

inline std::string runs_csv(const GamesSummary& s) {
  std::string out = "run,miner_id,blocks,weight,balance,real_value\n";
  for (const auto& r : s.records) {
    out += std::to_string(r.run) + ',' + std::to_string(r.miner) + ',' + std::to_string(r.blocks) + ',' +
           fmt(r.weight) + ',' + fmt(r.balance) + ',' + fmt(r.real_value) + '\n';
  }
  return out;
}

inline json instance_to_json(const mdp::Instance& inst) {
  json j;
  j["epoch_len"] = inst.epoch_len;
  j["factor"] = inst.factor;
  j["rho"] = inst.rho;
  j["mint_per_block"] = inst.mint_per_block;
  j["share"] = inst.share;
  j["commitments"] = inst.commitments ? json(*inst.commitments) : json(nullptr);
  j["alpha"] = inst.alpha();
  return j;
}

/// (state, action, value) triples ordered by state key.
inline json policy_to_json(const mdp::Instance& inst, const mdp::Solution& sol) {
  std::vector<std::uint64_t> keys;
  for (const auto& [k, e] : sol.policy) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  json states = json::array();
  for (std::uint64_t k : keys) {
    const auto s = mdp::State::from_key(k);
    const auto& e = sol.policy.at(k);
    std::string secret;
    for (std::uint32_t b = 0; b < s.secret_len; ++b) secret += (s.secret >> b) & 1u ? 'F' : 'R';
    states.push_back({{"att_factored", s.att_factored},
                      {"att_regular", s.att_regular},
                      {"cohort", s.cohort},
                      {"secret", secret},
                      {"public_len", s.public_len},
                      {"fork", s.fork},
                      {"action", mdp::to_string(e.action)},
                      {"value", e.value}});
  }
  return {{"instance", instance_to_json(inst)}, {"value", sol.value}, {"states", states}};
}

}  // namespace heb::io
