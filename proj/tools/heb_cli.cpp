// heb: run mining-game simulations and evaluate HEB metrics from the command line.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "heb/experiment.hpp"

namespace {

using heb::experiment::ConfigError;
using heb::experiment::ExperimentConfig;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> runs;
  std::optional<unsigned> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON experiment config");
  cmd->add_option("--preset", c.preset, "built-in config name");
  cmd->add_option("--out", c.out, "write CSV here instead of stdout");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--runs", c.runs, "number of epochs to simulate");
  cmd->add_option("--jobs", c.jobs, "worker threads");
}

ExperimentConfig load(const Common& c, const std::string& command) {
  if (!c.config_path.empty() && !c.preset.empty()) throw ConfigError("config", "give --config or --preset, not both");
  ExperimentConfig cfg;
  cfg.command = command;
  if (!c.preset.empty()) {
    cfg = heb::experiment::preset(c.preset);
  } else if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("config", "cannot open " + c.config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", e.what());
    }
    if (!j.contains("command")) j["command"] = command;
    cfg = heb::experiment::parse_config(j);
  }
  if (cfg.command != command) {
    throw ConfigError("command", "config is for \"" + cfg.command + "\", not \"" + command + "\"");
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.runs) cfg.runs = *c.runs;
  if (c.jobs) cfg.jobs = *c.jobs;
  return cfg;
}

std::vector<double> parse_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(field, "not a number: " + item);
    }
  }
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("out", "cannot write " + path);
  out << text;
}

void report(const heb::experiment::Output& o, const Common& c, const std::string& detail_path = "") {
  for (const auto& w : o.warnings) std::cerr << "warning: " << w << '\n';
  emit(o.csv, c.out);
  if (!detail_path.empty()) emit(o.detail_csv, detail_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HEB mining-game simulator and metric evaluator"};
  app.require_subcommand(1);

  Common sim_opts, eps_opts, curve_opts, mdp_opts, cost_opts;
  std::string runs_out;
  auto* sim = app.add_subcommand("simulate", "play epochs and write per-miner statistics");
  add_common(sim, sim_opts);
  sim->add_option("--runs-out", runs_out, "also write per-run CSV here");

  std::string eps_shares;
  std::optional<std::uint64_t> eps_len;
  std::optional<double> eps_factor;
  auto* eps = app.add_subcommand("epsilon", "size-indifference epsilon per distribution");
  add_common(eps, eps_opts);
  eps->add_option("--shares", eps_shares, "comma-separated distribution");
  eps->add_option("--epoch-len", eps_len, "l");
  eps->add_option("--factor", eps_factor, "phi");

  std::string figure;
  auto* curves = app.add_subcommand("curves", "figure data: fig2a, fig2b, fig4, fig5");
  add_common(curves, curve_opts);
  curves->add_option("figure", figure, "which figure")->check(CLI::IsMember({"fig2a", "fig2b", "fig4", "fig5"}));

  std::string mdp_shares, mdp_rhos;
  std::optional<std::uint64_t> mdp_len, mdp_games;
  bool timing = false;
  auto* mdp = app.add_subcommand("mdp", "minimal factor making prescribed play a best response");
  add_common(mdp, mdp_opts);
  mdp->add_option("--shares", mdp_shares, "comma-separated attacker shares");
  mdp->add_option("--rhos", mdp_rhos, "comma-separated rho grid");
  mdp->add_option("--epoch-len", mdp_len, "horizon l");
  mdp->add_option("--games", mdp_games, "rollouts per candidate");
  mdp->add_flag("--timing", timing, "add a runtime column");

  std::string cost_rhos = "0.5";
  auto* costs = app.add_subcommand("costs", "attack costs and external expense");
  costs->add_option("--rho", cost_rhos, "comma-separated rho values");
  costs->add_option("--out", cost_opts.out, "write CSV here instead of stdout");

  app.add_subcommand("presets", "list built-in configs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      report(heb::experiment::simulate(load(sim_opts, "simulate")), sim_opts, runs_out);
    } else if (eps->parsed()) {
      ExperimentConfig cfg = load(eps_opts, "epsilon");
      if (!eps_shares.empty()) cfg.distributions = {parse_list(eps_shares, "shares")};
      if (eps_len) cfg.params.epoch_len = *eps_len;
      if (eps_factor) cfg.params.factor = {std::to_string(*eps_factor)};
      report(heb::experiment::epsilon_table(cfg), eps_opts);
    } else if (curves->parsed()) {
      ExperimentConfig cfg =
          curve_opts.preset.empty() && curve_opts.config_path.empty() ? heb::experiment::preset(figure)
                                                                       : load(curve_opts, "curves");
      if (cfg.figure != figure) throw ConfigError("figure", "config is for " + cfg.figure + ", not " + figure);
      report(heb::experiment::curves(cfg), curve_opts);
    } else if (mdp->parsed()) {
      ExperimentConfig cfg = mdp_opts.preset.empty() && mdp_opts.config_path.empty()
                                 ? heb::experiment::preset("fig3-small")
                                 : load(mdp_opts, "mdp");
      if (mdp_opts.seed) cfg.seed = *mdp_opts.seed;
      if (!mdp_shares.empty()) {
        cfg.shares.clear();
        for (double s : parse_list(mdp_shares, "shares")) cfg.shares.push_back({std::to_string(s)});
      }
      if (!mdp_rhos.empty()) cfg.rhos = parse_list(mdp_rhos, "rhos");
      if (mdp_len) cfg.params.epoch_len = *mdp_len;
      if (mdp_games) cfg.games = *mdp_games;
      if (timing) cfg.timing = true;
      report(heb::experiment::mdp_table(cfg), mdp_opts);
    } else if (costs->parsed()) {
      report(heb::experiment::costs_table(parse_list(cost_rhos, "rho")), cost_opts);
    } else {
      for (const auto& [name, text] : heb::experiment::presets()) {
        std::cout << name << '\t' << json::parse(text).at("command").get<std::string>() << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
