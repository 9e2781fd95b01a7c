#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "heb/io.hpp"
#include "heb/mdp.hpp"
#include "heb/metrics.hpp"
#include "heb/protocol.hpp"
#include "heb/sim.hpp"

namespace heb::experiment {

using nlohmann::json;

/// A configuration problem; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A number written in the config, kept as its decimal text so rational mode stays exact.
struct Decimal {
  std::string text = "0";

  double as_double() const { return std::stod(text); }
  template <class Num>
  Num as() const {
    return from_decimal<Num>(text);
  }
};

struct ParamsConfig {
  std::uint64_t epoch_len = 1000;
  Decimal factor{"20"};
  Decimal rho{"0.5"};
  Decimal mint_per_block{"1"};
  Decimal user_balance{"1e9"};
  double max_miner_user_ratio = 1e-3;

  template <class Num>
  EpochParams<Num> build() const {
    EpochParams<Num> p;
    p.epoch_len = epoch_len;
    p.factor = factor.as<Num>();
    p.rho = rho.as<Num>();
    p.mint_per_block = mint_per_block.as<Num>();
    p.user_balance = user_balance.as<Num>();
    p.max_miner_user_ratio = max_miner_user_ratio;
    return p;
  }
};

struct ExperimentConfig {
  std::string command = "simulate";
  std::string protocol = "heb";
  std::string arithmetic = "double";
  ParamsConfig params;
  std::vector<Decimal> shares;
  std::vector<std::string> strategies;  // one per miner; empty means all prescribed
  std::uint64_t seed = 1;
  std::uint64_t runs = 100;
  unsigned jobs = 1;
  bool allow_fractional_quota = false;

  std::vector<std::vector<double>> distributions;  // epsilon
  std::string figure;                              // curves
  std::vector<double> grid_x;                      // curves: l, phi or rho values
  std::vector<double> grid_shares;                 // curves
  std::vector<double> rhos;                        // mdp
  std::uint64_t games = 500;                       // mdp
  double factor_lo = 1;
  double factor_hi = 1e8;
  double rel_tol = 1e-3;
  std::uint64_t horizon_cap = 12;
  bool timing = false;
};

namespace detail {

inline Decimal decimal(const json& j, const std::string& field) {
  if (j.is_number()) return {j.dump()};
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    try {
      heb::detail::parse_decimal(s);
    } catch (const std::exception&) {
      throw ConfigError(field, "not a decimal number: " + s);
    }
    return {s};
  }
  throw ConfigError(field, "expected a number");
}

inline double real(const json& j, const std::string& field) { return decimal(j, field).as_double(); }

inline std::uint64_t count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(field, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

/// A list of numbers, or {"from", "to", "step"} expanded inclusively.
inline std::vector<double> grid(const json& j, const std::string& field) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(real(v, field));
  } else if (j.is_object()) {
    const double from = real(j.at("from"), field + ".from");
    const double to = real(j.at("to"), field + ".to");
    const double step = real(j.at("step"), field + ".step");
    if (!(step > 0)) throw ConfigError(field, "step must be positive");
    const auto n = static_cast<std::uint64_t>(std::floor((to - from) / step + 1e-9));
    for (std::uint64_t k = 0; k <= n; ++k) out.push_back(from + static_cast<double>(k) * step);
  } else {
    throw ConfigError(field, "expected a list or {from, to, step}");
  }
  if (out.empty()) throw ConfigError(field, "empty grid");
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig c;
  static const std::vector<std::string> known{"command", "protocol", "arithmetic", "params", "shares", "strategies",
                                              "seed", "runs", "jobs", "allow_fractional_quota", "distributions",
                                              "figure", "grid", "rhos", "games", "factor_range", "rel_tol",
                                              "horizon_cap", "timing"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(key, "unknown field");
  }
  if (j.contains("command")) c.command = j["command"].get<std::string>();
  if (j.contains("protocol")) c.protocol = j["protocol"].get<std::string>();
  if (j.contains("arithmetic")) c.arithmetic = j["arithmetic"].get<std::string>();
  if (c.arithmetic != "double" && c.arithmetic != "rational") {
    throw ConfigError("arithmetic", "expected \"double\" or \"rational\"");
  }
  if (j.contains("params")) {
    const auto& p = j["params"];
    if (p.contains("epoch_len")) c.params.epoch_len = count(p["epoch_len"], "params.epoch_len");
    if (p.contains("factor")) c.params.factor = decimal(p["factor"], "params.factor");
    if (p.contains("rho")) c.params.rho = decimal(p["rho"], "params.rho");
    if (p.contains("mint_per_block")) c.params.mint_per_block = decimal(p["mint_per_block"], "params.mint_per_block");
    if (p.contains("user_balance")) c.params.user_balance = decimal(p["user_balance"], "params.user_balance");
    if (p.contains("max_miner_user_ratio")) {
      c.params.max_miner_user_ratio = real(p["max_miner_user_ratio"], "params.max_miner_user_ratio");
    }
  }
  if (j.contains("shares")) {
    for (const auto& v : j["shares"]) c.shares.push_back(decimal(v, "shares"));
  }
  if (j.contains("strategies")) {
    if (j["strategies"].is_string()) {
      c.strategies.assign(std::max<std::size_t>(c.shares.size(), 1), j["strategies"].get<std::string>());
    } else {
      for (const auto& v : j["strategies"]) c.strategies.push_back(v.get<std::string>());
    }
  }
  if (j.contains("seed")) c.seed = count(j["seed"], "seed");
  if (j.contains("runs")) c.runs = count(j["runs"], "runs");
  if (j.contains("jobs")) c.jobs = static_cast<unsigned>(count(j["jobs"], "jobs"));
  if (j.contains("allow_fractional_quota")) c.allow_fractional_quota = j["allow_fractional_quota"].get<bool>();
  if (j.contains("distributions")) {
    for (const auto& d : j["distributions"]) {
      std::vector<double> row;
      for (const auto& v : d) row.push_back(real(v, "distributions"));
      c.distributions.push_back(row);
    }
  }
  if (j.contains("figure")) c.figure = j["figure"].get<std::string>();
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("x")) c.grid_x = grid(g["x"], "grid.x");
    if (g.contains("shares")) c.grid_shares = grid(g["shares"], "grid.shares");
  }
  if (j.contains("rhos")) c.rhos = grid(j["rhos"], "rhos");
  if (j.contains("games")) c.games = count(j["games"], "games");
  if (j.contains("factor_range")) {
    const auto& r = j["factor_range"];
    if (!r.is_array() || r.size() != 2) throw ConfigError("factor_range", "expected [lo, hi]");
    c.factor_lo = real(r[0], "factor_range");
    c.factor_hi = real(r[1], "factor_range");
  }
  if (j.contains("rel_tol")) c.rel_tol = real(j["rel_tol"], "rel_tol");
  if (j.contains("horizon_cap")) c.horizon_cap = count(j["horizon_cap"], "horizon_cap");
  if (j.contains("timing")) c.timing = j["timing"].get<bool>();
  return c;
}

inline const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> p{
      {"bitcoin-baseline", R"({"command": "simulate", "protocol": "nakamoto",
        "params": {"epoch_len": 100, "factor": 1, "rho": 0},
        "shares": [0.2, 0.2, 0.2, 0.2, 0.2], "strategies": "prescribed", "runs": 1000, "seed": 1})"},
      {"heb-practical", R"({"command": "simulate", "protocol": "heb",
        "params": {"epoch_len": 1000, "factor": 20, "rho": 0.5},
        "shares": [0.1, 0.15, 0.2, 0.2, 0.35], "strategies": "prescribed", "runs": 100, "seed": 1})"},
      {"table2", R"({"command": "epsilon", "params": {"epoch_len": 1000, "factor": 20},
        "distributions": [[0.2, 0.8], [0.1, 0.15, 0.2, 0.2, 0.35], [0.2, 0.4, 0.4], [0.2, 0.2, 0.3, 0.3],
                          [0.2, 0.2, 0.2, 0.2, 0.2]]})"},
      {"fig2a", R"({"command": "curves", "figure": "fig2a", "params": {"factor": 20},
        "grid": {"x": {"from": 100, "to": 10000, "step": 100}, "shares": [0.05, 0.1, 0.2, 0.4]}})"},
      {"fig2b", R"({"command": "curves", "figure": "fig2b", "params": {"epoch_len": 1000},
        "grid": {"x": {"from": 1, "to": 50, "step": 1}, "shares": [0.05, 0.1, 0.2, 0.4]}})"},
      {"fig3-small", R"({"command": "mdp", "params": {"epoch_len": 8},
        "shares": [0.1, 0.2, 0.3], "rhos": [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        "games": 500, "seed": 1, "factor_range": [1, 1e8]})"},
      {"fig4", R"({"command": "curves", "figure": "fig4", "grid": {"x": {"from": 0, "to": 0.99, "step": 0.01}}})"},
      {"fig5", R"({"command": "curves", "figure": "fig5",
        "grid": {"x": {"from": 1, "to": 20, "step": 0.5}, "shares": [0.1, 0.2, 0.3]}})"},
  };
  return p;
}

inline ExperimentConfig preset(const std::string& name) {
  auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("preset", "unknown preset " + name);
  return parse_config(json::parse(it->second));
}

/// Output of a command: the main CSV plus optional per-run detail and diagnostics.
struct Output {
  std::string csv;
  std::string detail_csv;
  std::vector<std::string> warnings;
};

namespace detail {

template <class Num>
Output simulate_as(const ExperimentConfig& c) {
  const auto params = c.params.build<Num>();
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("params", e.what());
  }
  const auto protocol = make_protocol<Num>(c.protocol);
  std::vector<Num> shares;
  Num sum{};
  for (const auto& s : c.shares) {
    shares.push_back(s.as<Num>());
    sum += shares.back();
    if (!(shares.back() > 0)) throw ConfigError("shares", "each share must be positive");
  }
  if (std::abs(to_double(Num(sum - 1))) > 1e-12) {
    throw ConfigError("shares", "shares sum to " + NumTraits<Num>::to_string(sum) + ", not 1");
  }
  if (protocol.quota_rule() != QuotaRule::none && !(params.rho == 0) && !c.allow_fractional_quota) {
    for (const auto& s : c.shares) {
      const Rational q = s.as<Rational>() * static_cast<long long>(c.params.epoch_len);
      if (boost::multiprecision::denominator(q) != 1) {
        throw ConfigError("shares", "epoch_len * share " + s.text +
                                        " is not an integer (set allow_fractional_quota to floor the quota)");
      }
    }
  }
  std::vector<StrategyPtr<Num>> strategies;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const std::string name = c.strategies.empty() ? "prescribed" : c.strategies.at(i);
    try {
      strategies.push_back(make_strategy<Num>(name, protocol));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("strategies", e.what());
    }
  }
  auto miners = equilibrium_miners<Num>(shares, params, strategies);
  const auto summary = run_games(params, miners, protocol, c.runs, c.seed, c.jobs);
  return {io::aggregate_csv(summary), io::runs_csv(summary), summary.warnings};
}

inline std::string join(const std::vector<double>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v[i]);
    s += buf;
  }
  return s;
}

}  // namespace detail

inline Output simulate(const ExperimentConfig& c) {
  if (c.shares.empty()) throw ConfigError("shares", "at least one miner required");
  if (!c.strategies.empty() && c.strategies.size() != c.shares.size()) {
    throw ConfigError("strategies", "expected one strategy per share");
  }
  if (c.runs == 0) throw ConfigError("runs", "must be >= 1");
  try {
    parse_protocol_kind(c.protocol);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("protocol", e.what());
  }
  return c.arithmetic == "rational" ? detail::simulate_as<Rational>(c) : detail::simulate_as<double>(c);
}

/// distribution,epsilon,epsilon_4dp with shares joined by ';'.
inline Output epsilon_table(const ExperimentConfig& c) {
  if (c.distributions.empty()) throw ConfigError("distributions", "no distributions given");
  const double phi = c.params.factor.as_double();
  Output out;
  out.csv = "distribution,epsilon,epsilon_4dp\n";
  for (const auto& d : c.distributions) {
    BalanceDistribution dist{d};
    try {
      dist.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("distributions", e.what());
    }
    const double eps = epsilon(dist, c.params.epoch_len, phi);
    out.csv += detail::join(d, ';') + ',' + io::fmt(eps, 10) + ',' + io::fmt(eps, 4) + '\n';
  }
  return out;
}

inline Output curves(const ExperimentConfig& c) {
  Output out;
  const auto& x = c.grid_x;
  if (x.empty()) throw ConfigError("grid.x", "missing grid");
  if (c.figure == "fig2a" || c.figure == "fig2b" || c.figure == "fig5") {
    if (c.grid_shares.empty()) throw ConfigError("grid.shares", "missing shares");
    for (double b : c.grid_shares) {
      if (!(b > 0) || b > 1) throw ConfigError("grid.shares", "each share must lie in (0, 1]");
    }
  }
  if (c.figure == "fig2a") {
    std::vector<std::uint64_t> lengths;
    for (double l : x) {
      if (!(l >= 1)) throw ConfigError("grid.x", "epoch lengths must be >= 1");
      lengths.push_back(static_cast<std::uint64_t>(std::llround(l)));
    }
    out.csv = "l,share,value\n";
    for (const auto& p : weight_curve_by_length(c.grid_shares, lengths, c.params.factor.as_double())) {
      out.csv += std::to_string(static_cast<std::uint64_t>(p.x)) + ',' + io::fmt(p.share, 4) + ',' + io::fmt(p.value) + '\n';
    }
  } else if (c.figure == "fig2b") {
    for (double phi : x) {
      if (!(phi >= 1)) throw ConfigError("grid.x", "factors must be >= 1");
    }
    out.csv = "phi,share,value\n";
    for (const auto& p : weight_curve_by_factor(c.grid_shares, x, c.params.epoch_len)) {
      out.csv += io::fmt(p.x, 4) + ',' + io::fmt(p.share, 4) + ',' + io::fmt(p.value) + '\n';
    }
  } else if (c.figure == "fig4") {
    out.csv = "rho,bound\n";
    for (double rho : x) {
      if (!(rho >= 0) || !(rho < 1)) throw ConfigError("grid.x", "rho must lie in [0, 1)");
      out.csv += io::fmt(rho, 4) + ',' + io::fmt(pow_only_bound(rho)) + '\n';
    }
  } else if (c.figure == "fig5") {
    out.csv = "phi,share,nu\n";
    for (double b : c.grid_shares) {
      for (double phi : x) {
        if (!(phi >= 1)) throw ConfigError("grid.x", "factors must be >= 1");
        out.csv += io::fmt(phi, 4) + ',' + io::fmt(b, 4) + ',' + io::fmt(permissiveness(b, phi)) + '\n';
      }
    }
  } else {
    throw ConfigError("figure", "expected fig2a, fig2b, fig4 or fig5, got \"" + c.figure + "\"");
  }
  return out;
}

/// rho,share,phi_min with -1 when no factor in range works; runtime_s only with `timing`.
inline Output mdp_table(const ExperimentConfig& c) {
  if (c.shares.empty()) throw ConfigError("shares", "at least one share required");
  if (c.rhos.empty()) throw ConfigError("rhos", "at least one rho required");
  if (c.games == 0) throw ConfigError("games", "must be >= 1");
  Output out;
  out.csv = c.timing ? "rho,share,phi_min,runtime_s\n" : "rho,share,phi_min\n";
  for (const auto& s : c.shares) {
    const double share = s.as_double();
    if (!(share >= 0) || !(share < 1)) throw ConfigError("shares", "each share must lie in [0, 1)");
    for (double rho : c.rhos) {
      if (!(rho >= 0) || !(rho < 1)) throw ConfigError("rhos", "rho must lie in [0, 1)");
      const auto t0 = std::chrono::steady_clock::now();
      std::string value;
      try {
        const auto r = mdp::min_factor(share, rho, c.params.epoch_len, c.games, c.seed, c.factor_lo, c.factor_hi,
                                       c.rel_tol, c.horizon_cap);
        value = r.factor ? io::fmt(*r.factor, 4) : "-1";
        if (r.factor && (!r.below_fails || !r.double_passes)) {
          out.warnings.push_back("non-monotone classification near phi_min at rho=" + io::fmt(rho, 2) +
                                 " share=" + io::fmt(share, 2));
        }
      } catch (const mdp::StateBudgetError& e) {
        value = "error";
        out.warnings.push_back(std::string("rho=") + io::fmt(rho, 2) + ": " + e.what());
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.csv += io::fmt(rho, 4) + ',' + io::fmt(share, 4) + ',' + value;
      if (c.timing) out.csv += ',' + io::fmt(secs, 3);
      out.csv += '\n';
    }
  }
  return out;
}

inline Output costs_table(const std::vector<double>& rhos) {
  Output out;
  out.csv = "rho,attack_cost_refunded,attack_cost_sabotage,external_expense_heb,external_expense_nakamoto\n";
  for (double rho : rhos) {
    if (!(rho >= 0) || !(rho < 1)) throw ConfigError("rho", "rho must lie in [0, 1)");
    const auto costs = attack_costs(rho);
    out.csv += io::fmt(rho, 4) + ',' + io::fmt(costs.refunded, 4) + ',' + io::fmt(costs.sabotage, 4) + ',' +
               io::fmt(external_expense(rho), 4) + ',' + io::fmt(nakamoto_external_expense(), 4) + '\n';
  }
  return out;
}

inline Output run(const ExperimentConfig& c) {
  if (c.command == "simulate") return simulate(c);
  if (c.command == "epsilon") return epsilon_table(c);
  if (c.command == "curves") return curves(c);
  if (c.command == "mdp") return mdp_table(c);
  if (c.command == "costs") return costs_table(c.rhos.empty() ? std::vector<double>{c.params.rho.as_double()} : c.rhos);
  throw ConfigError("command", "unknown command \"" + c.command + "\"");
}

}  // namespace heb::experiment
