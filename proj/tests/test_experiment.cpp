#include <gtest/gtest.h>

#include <sstream>

#include "heb/experiment.hpp"

using namespace heb;
using namespace heb::experiment;

namespace {

std::vector<std::vector<std::string>> rows(const std::string& csv) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

std::string field_of(const json& j) {
  try {
    const auto c = parse_config(j);
    run(c);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, FieldErrors) {
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"shares", {0.5, 0.6}}, {"runs", 1}}), "shares");
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"shares", {0.5, 0.5}}, {"bogus", 1}}), "bogus");
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"protocol", "pos"}, {"shares", {1}}}), "protocol");
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"shares", {0.5, 0.5}}, {"strategies", {"greedy", "prescribed"}},
                          {"params", {{"epoch_len", 10}}}, {"runs", 1}}),
            "strategies");
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"shares", {0.5, 0.5}}, {"params", {{"rho", 1.5}}}}), "params");
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"shares", {0.33, 0.67}}, {"params", {{"epoch_len", 10}}}}),
            "shares");  // 3.3 blocks of quota
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"arithmetic", "float"}}), "arithmetic");
  EXPECT_EQ(field_of(json{{"command", "epsilon"}, {"distributions", {{0.5, 0.4}}}}), "distributions");
  EXPECT_EQ(field_of(json{{"command", "curves"}, {"figure", "fig9"}, {"grid", {{"x", {1}}}}}), "figure");
  EXPECT_EQ(field_of(json{{"command", "mdp"}, {"shares", {0.2}}, {"rhos", {1.2}}}), "rhos");
  EXPECT_EQ(field_of(json{{"command", "dance"}}), "command");
  EXPECT_EQ(field_of(json{{"command", "simulate"}, {"runs", -3}}), "runs");
  EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Config, GridExpansion) {
  const auto c = parse_config(json::parse(R"({"command": "curves", "figure": "fig4",
      "grid": {"x": {"from": 0, "to": 0.3, "step": 0.1}}})"));
  ASSERT_EQ(c.grid_x.size(), 4u);
  EXPECT_NEAR(c.grid_x.back(), 0.3, 1e-12);
}

TEST(Presets, AllParse) {
  for (const auto& [name, text] : presets()) EXPECT_NO_THROW(preset(name)) << name;
  EXPECT_EQ(presets().size(), 8u);
}

TEST(Simulate, FractionalQuotaOptIn) {
  auto c = parse_config(json::parse(R"({"command": "simulate", "shares": [0.25, 0.75],
      "params": {"epoch_len": 6, "rho": 0.5}, "runs": 3})"));
  EXPECT_THROW(simulate(c), ConfigError);
  c.allow_fractional_quota = true;
  EXPECT_EQ(rows(simulate(c).csv).size(), 3u);
}

TEST(Simulate, BitcoinBaselineIsFair) {
  const auto out = simulate(preset("bitcoin-baseline"));
  const auto r = rows(out.csv);
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r[0][0], "miner_id");
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double mean = std::stod(r[i][1]);
    const double se = std::stod(r[i][2]);
    EXPECT_NEAR(mean, 20.0, 4 * se) << i;
  }
  EXPECT_EQ(rows(out.detail_csv).size(), 1u + 5 * 1000);
}

TEST(Simulate, PracticalExternalSpend) {
  auto c = preset("heb-practical");
  c.runs = 5;
  const auto r = rows(simulate(c).csv);
  const std::vector<double> shares{0.1, 0.15, 0.2, 0.2, 0.35};
  for (std::size_t i = 0; i < shares.size(); ++i) {
    EXPECT_NEAR(std::stod(r[i + 1][5]), 0.5 * shares[i] * 1000, 1e-6);
  }
}

TEST(Simulate, RationalAndDoubleAgree) {
  auto c = parse_config(json::parse(R"({"command": "simulate", "shares": ["0.25", "0.75"],
      "params": {"epoch_len": 8, "rho": "0.5", "factor": 3}, "runs": 4, "seed": 5})"));
  const auto d = rows(simulate(c).csv);
  c.arithmetic = "rational";
  const auto q = rows(simulate(c).csv);
  ASSERT_EQ(d.size(), q.size());
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_NEAR(std::stod(d[i][1]), std::stod(q[i][1]), 1e-9);
}

TEST(Epsilon, ReferenceTable) {
  const auto r = rows(epsilon_table(preset("table2")).csv);
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r[0], (std::vector<std::string>{"distribution", "epsilon", "epsilon_4dp"}));
  const std::vector<double> want{0.0029, 0.0025, 0.0015, 0.0007, 0.0};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(std::stod(r[i + 1][1]), want[i], 2e-4);
  EXPECT_EQ(r[5][2], "0.0000");
  EXPECT_EQ(r[1][0], "0.2;0.8");
}

TEST(Curves, Fig4AndFig5Anchors) {
  const auto f4 = rows(curves(preset("fig4")).csv);
  EXPECT_EQ(f4[0], (std::vector<std::string>{"rho", "bound"}));
  EXPECT_EQ(f4[1][0], "0.0000");
  EXPECT_EQ(std::stod(f4[1][1]), 0.5);
  EXPECT_EQ(f4.size(), 101u);
  const auto f5 = rows(curves(preset("fig5")).csv);
  for (const auto& row : f5) {
    if (row[0] == "1.0000") EXPECT_EQ(std::stod(row[2]), 1.0);
  }
}

TEST(Curves, Fig2aIncreasing) {
  auto c = preset("fig2a");
  c.grid_x = {100, 500, 1000, 5000};
  const auto r = rows(curves(c).csv);
  EXPECT_EQ(r[0], (std::vector<std::string>{"l", "share", "value"}));
  for (std::size_t i = 2; i < r.size(); ++i) {
    if (r[i][1] == r[i - 1][1]) EXPECT_GT(std::stod(r[i][2]), std::stod(r[i - 1][2]));
    EXPECT_LT(std::stod(r[i][2]), 1.0);
  }
}

TEST(Costs, HalfRho) {
  const auto r = rows(costs_table({0.5}).csv);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1], (std::vector<std::string>{"0.5000", "1.0000", "0.5000", "0.5000", "1.0000"}));
}

TEST(Mdp, TableRowsAndSentinel) {
  auto c = preset("fig3-small");
  c.shares = {{"0.1"}, {"0.3"}};
  c.rhos = {0.5};
  c.params.epoch_len = 6;
  c.games = 100;
  const auto a = mdp_table(c);
  const auto r = rows(a.csv);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], (std::vector<std::string>{"rho", "share", "phi_min"}));
  int sentinels = 0;
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i][2] == "-1") ++sentinels;
    else EXPECT_GE(std::stod(r[i][2]), 1.0);
  }
  EXPECT_EQ(sentinels, 1);
  EXPECT_EQ(mdp_table(c).csv, a.csv);
  c.params.epoch_len = 13;
  const auto e = mdp_table(c);
  EXPECT_EQ(rows(e.csv)[1][2], "error");
  EXPECT_FALSE(e.warnings.empty());
  c.params.epoch_len = 4;
  c.timing = true;
  EXPECT_EQ(rows(mdp_table(c).csv)[0].size(), 4u);
}
