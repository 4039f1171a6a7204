#pragma once

// Experiment configuration: one JSON document, unknown keys rejected.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pofel/engine.hpp"
#include "pofel/incentive.hpp"

namespace pofel {

/// Shorthand for a block of bribed voters taking the highest node ids.
struct BribedSpec {
  double fraction = 0.0;
  VoteStrategy vote_strategy = VoteStrategy::kTargeted;
  double cbm = 1.0;
  std::optional<NodeId> target_id;  // defaults to the lowest bribed id
};

struct Range {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  /// min + i·step for i = 0.. while ≤ max (+ half a step of slack).
  std::vector<double> points() const;
};

struct IncentiveConfig {
  double B = 500.0;
  double lambda = 1.0;
  double phi = 5.0;
  std::vector<double> gamma{0.05};  // one value broadcasts to every node
  std::vector<double> mu{1.0};
  int n_nodes = 2;
  double fixed_F = 1000.0;
  double fixed_delta = 5000.0;
  double fixed_f_i = 40.0;
  double sum_f_others = 1000.0;
  double tol = 1e-7;
  double delta0 = 1000.0;
  Range delta_range{100.0, 10000.0, 10.0};
  Range f_range{0.0, 100.0, 0.01};
  Range F_range{100.0, 5000.0, 10.0};

  IncentiveParams params() const;
  void validate() const;
};

struct ExperimentConfig {
  int n_nodes = 50;
  std::uint64_t seed = 1;
  FelConfig fel;
  ConsensusParams consensus;
  int holdout_size = 500;
  bool allow_majority = false;
  std::vector<AdversaryProfile> profiles;
  BribedSpec bribed;
  IncentiveConfig incentive;
  int rounds = 20;
  std::string output_dir = "out";

  /// Explicit profiles plus the expanded bribed block.
  std::vector<AdversaryProfile> adversaries() const;
  EngineConfig engine_config() const;
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Strict parse; missing keys keep their defaults. Errors name the field path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" to a complete config document. The value is read as
/// JSON when it parses, otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);
ExperimentConfig with_overrides(const ExperimentConfig& cfg, const std::vector<std::string>& assignments);

}  // namespace pofel
