// Command-line front end: run, sweep, attack, incentive, defaults.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pofel/experiment.hpp"

namespace {

using pofel::Error;
using pofel::ErrorCode;
using pofel::ExperimentConfig;

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNoQuorum = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::optional<int> nodes;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "network.seed");
  cmd->add_option("--rounds", o.rounds, "rounds");
  cmd->add_option("--nodes", o.nodes, "network.n_nodes");
  cmd->add_option("--out", o.out, "output directory (default: output_dir from config)");
  cmd->add_option("--set", o.sets, "override a config path, e.g. --set consensus.g_max=0.95")->take_all();
}

ExperimentConfig resolve(const CommonOptions& o, const std::string& preset = "") {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : pofel::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.rounds) cfg.rounds = *o.rounds;
  if (o.nodes) cfg.n_nodes = *o.nodes;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!preset.empty()) cfg = pofel::apply_attack_preset(cfg, preset);
  cfg = pofel::with_overrides(cfg, o.sets);
  return cfg;
}

int report_run(const pofel::RunResult& r) {
  std::cout << "wrote " << r.dir.string() << ": " << r.completed_rounds << " block(s), " << r.aborted_rounds
            << " aborted round(s)\n";
  if (r.aborted_rounds > 0) {
    std::cerr << "error: no quorum in " << r.aborted_rounds << " round(s); see summary.json aborted_at\n";
    return kExitNoQuorum;
  }
  return 0;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw Error(ErrorCode::kConfig, "--values: bad number '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proof-of-federated-edge-learning consensus simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, attack_opts, inc_opts;

  auto* run = app.add_subcommand("run", "execute one experiment");
  add_common(run, run_opts);

  auto* sweep = app.add_subcommand("sweep", "one run per value of a parameter");
  add_common(sweep, sweep_opts);
  std::string axis, values;
  sweep->add_option("--axis", axis, "n_nodes | nonce_len | model_dim | cbm | malicious_fraction | rounds")
      ->required();
  sweep->add_option("--values", values, "comma-separated values")->required();

  auto* attack = app.add_subcommand("attack", "run a preset adversary scenario");
  add_common(attack, attack_opts);
  std::string preset;
  attack->add_option("--preset", preset, "attack preset")
      ->required()
      ->check(CLI::IsMember(pofel::attack_presets()));

  auto* incentive = app.add_subcommand("incentive", "utility curves and equilibrium of the reward game");
  add_common(incentive, inc_opts);
  std::string mode = "equilibrium";
  incentive->add_option("--mode", mode, "fix_F | fix_delta | equilibrium")
      ->check(CLI::IsMember({"fix_F", "fix_delta", "equilibrium"}));

  auto* defaults = app.add_subcommand("defaults", "print the default config document");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = resolve(run_opts);
      return report_run(pofel::run_experiment(cfg, cfg.output_dir));
    }
    if (*attack) {
      const ExperimentConfig cfg = resolve(attack_opts, preset);
      const auto r = pofel::run_experiment(cfg, cfg.output_dir);
      std::cout << "plagiarized reveals accepted: " << r.summary["adversary"]["plagiarized_accepted"]
                << ", duplicate flags: " << r.summary["hcds"]["duplicate_flags"]
                << ", mean WV honest/malicious: " << r.summary["mean_wv"]["honest"] << " / "
                << r.summary["mean_wv"]["malicious"] << "\n";
      return report_run(r);
    }
    if (*sweep) {
      const ExperimentConfig cfg = resolve(sweep_opts);
      const auto meta = pofel::sweep_experiment(cfg, pofel::parse_sweep_axis(axis), parse_values(values),
                                                cfg.output_dir);
      std::cout << "wrote " << meta["runs"].size() << " run(s) and combined.csv under " << cfg.output_dir << "\n";
      return 0;
    }
    if (*incentive) {
      const ExperimentConfig cfg = resolve(inc_opts);
      const auto report = pofel::incentive_report(cfg.incentive, pofel::parse_incentive_mode(mode), cfg.output_dir);
      for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
      std::cout << report.dump(2) << "\n";
      return 0;
    }
    if (*defaults) {
      std::cout << pofel::config_to_json(ExperimentConfig{}).dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kConfig:
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kParse:
        return kExitInvalid;
      case ErrorCode::kNoQuorum:
        return kExitNoQuorum;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
