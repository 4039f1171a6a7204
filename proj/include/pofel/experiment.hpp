#pragma once

// Experiment orchestration: single runs, sweeps, attack presets and incentive
// curves, each persisted as plot-ready CSV plus a JSON summary.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pofel/config.hpp"

namespace pofel {

/// Shortest round-trip decimal form, locale independent.
std::string format_double(double x);

/// In-memory products of one run, before anything touches the filesystem.
struct RunArtifacts {
  std::string ledger_jsonl;
  std::string rounds_csv;
  std::string scores_csv;
  std::string transcript_jsonl;
  nlohmann::json summary;
  int completed_rounds = 0;
  int aborted_rounds = 0;
};

RunArtifacts execute_run(const ExperimentConfig& cfg);

struct RunResult {
  std::filesystem::path dir;
  nlohmann::json summary;
  int completed_rounds = 0;
  int aborted_rounds = 0;
};

/// Writes ledger.jsonl, rounds.csv, scores.csv, summary.json,
/// hcds_transcript.jsonl and the resolved config.json into `dir`.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir);

enum class SweepAxis { kNodes, kNonceLen, kModelDim, kCbm, kMaliciousFraction, kRounds };

SweepAxis parse_sweep_axis(const std::string& s);
const char* to_string(SweepAxis axis);
ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, double value);

/// One run per value under `dir`, all sharing the base seed; combined.csv has
/// one (value, metric, result) row per value and metric.
nlohmann::json sweep_experiment(const ExperimentConfig& cfg, SweepAxis axis,
                                const std::vector<double>& values, const std::filesystem::path& dir);

const std::vector<std::string>& attack_presets();
ExperimentConfig apply_attack_preset(const ExperimentConfig& cfg, const std::string& preset);

enum class IncentiveMode { kFixF, kFixDelta, kEquilibrium };

IncentiveMode parse_incentive_mode(const std::string& s);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

/// U_tp over incentive.delta_range at F = fixed_F.
std::vector<CurvePoint> curve_utp_vs_delta(const IncentiveConfig& cfg);
/// U_tp over F_range at δ = fixed_delta.
std::vector<CurvePoint> curve_utp_vs_F(const IncentiveConfig& cfg);
/// U_i of node 1 over f_range at δ = fixed_delta and Σf_-i = sum_f_others.
std::vector<CurvePoint> curve_ui_vs_f(const IncentiveConfig& cfg);
/// U_i of node 1 over delta_range at f_i = fixed_f_i and Σf_-i = sum_f_others.
std::vector<CurvePoint> curve_ui_vs_delta(const IncentiveConfig& cfg);

/// First point with the largest y.
CurvePoint curve_peak(const std::vector<CurvePoint>& curve);

nlohmann::json incentive_report(const IncentiveConfig& cfg, IncentiveMode mode,
                                const std::filesystem::path& dir);

}  // namespace pofel
