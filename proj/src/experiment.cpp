#include "pofel/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pofel/block_codec.hpp"

namespace pofel {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

json mean_or_null(double sum, int count) { return count ? json(sum / count) : json(nullptr); }

json last_or_null(const std::vector<double>& v) { return v.empty() ? json(nullptr) : json(v.back()); }

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

int as_count(double value, const char* axis) {
  if (value != std::floor(value) || value < 0 || value > 1e9) {
    throw Error(ErrorCode::kConfig, std::string("sweep axis ") + axis + ": value must be a non-negative integer");
  }
  return static_cast<int>(value);
}

std::string curve_csv(const std::vector<CurvePoint>& curve, const char* y_name) {
  std::string out = std::string("x,") + y_name + "\n";
  for (const auto& p : curve) out += format_double(p.x) + "," + format_double(p.y) + "\n";
  return out;
}

json peak_json(const std::vector<CurvePoint>& curve) {
  const CurvePoint p = curve_peak(curve);
  return {{"x", p.x}, {"y", p.y}};
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error(ErrorCode::kIo, "format_double: buffer too small");
  return std::string(buf, end);
}

RunArtifacts execute_run(const ExperimentConfig& cfg) {
  cfg.validate();
  RoundEngine engine(cfg.engine_config());
  const int n = cfg.n_nodes;
  std::map<NodeId, AdversaryKind> kinds;
  for (const auto& p : cfg.adversaries()) kinds[p.node_id] = p.kind;

  std::string rounds_csv = "round,leader";
  for (int i = 1; i <= n; ++i) rounds_csv += ",s_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) rounds_csv += ",advotes_" + std::to_string(i);
  rounds_csv += "\n";
  std::string scores_csv = "round,node,vote,score,chs,wv\n";
  std::string transcript;

  RunArtifacts out;
  std::map<std::string, int> histogram;
  for (int i = 1; i <= n; ++i) histogram[std::to_string(i)] = 0;
  std::map<std::string, int> verdict_counts;
  std::vector<std::uint64_t> aborted_at;
  std::vector<double> wv_honest, wv_malicious;
  HcdsStats hcds_total;
  std::uint64_t duplicate_flags = 0;
  std::uint64_t plagiarism_attempts = 0;
  std::uint64_t plagiarized_accepted = 0;
  std::uint64_t bribed_acts = 0;
  std::uint64_t honest_verdicts = 0;
  std::uint64_t honest_accepted = 0;
  std::size_t dverify_per_node = 0;

  for (int r = 0; r < cfg.rounds; ++r) {
    const RoundRecord rec = engine.run_round();

    for (const auto& entry : rec.transcript) transcript += transcript_entry_json(entry).dump() + "\n";
    hcds_total.signature_verifications += rec.hcds_stats.signature_verifications;
    hcds_total.hash_evaluations += rec.hcds_stats.hash_evaluations;
    hcds_total.hashed_bytes += rec.hcds_stats.hashed_bytes;
    dverify_per_node = rec.dverify_per_node;
    for (const auto& [node, v] : rec.hcds_verdicts) {
      ++verdict_counts[v.verdict.str()];
      if (v.duplicate) ++duplicate_flags;
      if (!engine.is_adversary(node)) {
        ++honest_verdicts;
        if (v.verdict.accepted) ++honest_accepted;
      }
    }
    for (NodeId node : rec.adversaries_acted) {
      if (kinds.at(node) == AdversaryKind::kPlagiarist) {
        ++plagiarism_attempts;
        if (rec.hcds_verdicts.at(node).verdict.accepted) ++plagiarized_accepted;
      } else {
        ++bribed_acts;
      }
    }

    if (rec.aborted) {
      ++out.aborted_rounds;
      aborted_at.push_back(rec.round);
      continue;
    }
    ++out.completed_rounds;
    ++histogram[std::to_string(rec.leader)];

    std::map<NodeId, double> advotes;
    const TallyResult& t = *rec.tally;
    for (std::size_t j = 0; j < t.candidates.size(); ++j) {
      advotes[t.candidates[j]] = t.adjusted_votes[static_cast<Eigen::Index>(j)];
    }
    std::string row = std::to_string(rec.round) + "," + std::to_string(rec.leader);
    for (NodeId i = 1; i <= n; ++i) {
      row += ",";
      if (advotes.count(i)) row += format_double(rec.score.at(i));
    }
    for (NodeId i = 1; i <= n; ++i) {
      row += ",";
      if (advotes.count(i)) row += format_double(advotes.at(i));
    }
    rounds_csv += row + "\n";

    double sum_h = 0.0, sum_m = 0.0;
    int cnt_h = 0, cnt_m = 0;
    for (NodeId i = 1; i <= n; ++i) {
      auto vote = rec.vote.find(i);
      scores_csv += std::to_string(rec.round) + "," + std::to_string(i) + "," +
                    (vote == rec.vote.end() ? std::string() : std::to_string(vote->second)) + "," +
                    format_double(rec.score.at(i)) + "," + format_double(rec.chs.at(i)) + "," +
                    format_double(rec.wv.at(i)) + "\n";
      if (engine.is_adversary(i)) {
        sum_m += rec.wv.at(i);
        ++cnt_m;
      } else {
        sum_h += rec.wv.at(i);
        ++cnt_h;
      }
    }
    wv_honest.push_back(sum_h / cnt_h);
    if (cnt_m) wv_malicious.push_back(sum_m / cnt_m);
  }

  std::ostringstream ledger;
  write_ledger_jsonl(ledger, engine.ledger().blocks());

  json summary;
  summary["seed"] = cfg.seed;
  summary["rounds"] = cfg.rounds;
  summary["completed_rounds"] = out.completed_rounds;
  summary["aborted_rounds"] = out.aborted_rounds;
  summary["aborted_at"] = aborted_at;
  summary["leader_histogram"] = histogram;
  summary["mean_wv"] = {{"honest", last_or_null(wv_honest)},
                        {"malicious", last_or_null(wv_malicious)},
                        {"honest_by_round", wv_honest},
                        {"malicious_by_round", wv_malicious}};
  summary["hcds"] = {{"verdicts", verdict_counts},
                     {"duplicate_flags", duplicate_flags},
                     {"honest_acceptance_rate",
                      mean_or_null(static_cast<double>(honest_accepted), static_cast<int>(honest_verdicts))},
                     {"signature_verifications", hcds_total.signature_verifications},
                     {"hash_evaluations", hcds_total.hash_evaluations},
                     {"hashed_bytes", hcds_total.hashed_bytes},
                     {"dverify_per_node", dverify_per_node}};
  summary["adversary"] = {{"plagiarism_attempts", plagiarism_attempts},
                          {"plagiarized_accepted", plagiarized_accepted},
                          {"bribed_acts", bribed_acts}};
  std::optional<double> final_loss;
  if (engine.initial_loss()) final_loss = engine.holdout_loss(engine.global_model());
  summary["initial_loss"] = optional_json(engine.initial_loss());
  summary["final_loss"] = optional_json(final_loss);

  out.ledger_jsonl = ledger.str();
  out.rounds_csv = std::move(rounds_csv);
  out.scores_csv = std::move(scores_csv);
  out.transcript_jsonl = std::move(transcript);
  out.summary = std::move(summary);
  return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
  RunArtifacts a = execute_run(cfg);
  make_dir(dir);
  write_file(dir / "ledger.jsonl", a.ledger_jsonl);
  write_file(dir / "rounds.csv", a.rounds_csv);
  write_file(dir / "scores.csv", a.scores_csv);
  write_file(dir / "hcds_transcript.jsonl", a.transcript_jsonl);
  write_file(dir / "summary.json", a.summary.dump(2) + "\n");
  write_file(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  return {dir, std::move(a.summary), a.completed_rounds, a.aborted_rounds};
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "n_nodes") return SweepAxis::kNodes;
  if (s == "nonce_len") return SweepAxis::kNonceLen;
  if (s == "model_dim") return SweepAxis::kModelDim;
  if (s == "cbm") return SweepAxis::kCbm;
  if (s == "malicious_fraction") return SweepAxis::kMaliciousFraction;
  if (s == "rounds") return SweepAxis::kRounds;
  throw Error(ErrorCode::kConfig, "unknown sweep axis '" + s + "'");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNodes: return "n_nodes";
    case SweepAxis::kNonceLen: return "nonce_len";
    case SweepAxis::kModelDim: return "model_dim";
    case SweepAxis::kCbm: return "cbm";
    case SweepAxis::kMaliciousFraction: return "malicious_fraction";
    case SweepAxis::kRounds: return "rounds";
  }
  return "?";
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  ExperimentConfig c = cfg;
  const char* name = to_string(axis);
  switch (axis) {
    case SweepAxis::kNodes: c.n_nodes = as_count(value, name); break;
    case SweepAxis::kNonceLen: c.consensus.hcds.nonce_len = static_cast<std::size_t>(as_count(value, name)); break;
    case SweepAxis::kModelDim: c.fel.model_dim = as_count(value, name); break;
    case SweepAxis::kRounds: c.rounds = as_count(value, name); break;
    case SweepAxis::kCbm:
      c.bribed.cbm = value;
      for (auto& p : c.profiles) p.cbm = value;
      break;
    case SweepAxis::kMaliciousFraction: c.bribed.fraction = value; break;
  }
  return c;
}

json sweep_experiment(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                      const fs::path& dir) {
  if (values.empty()) throw Error(ErrorCode::kConfig, "sweep: no values given");
  // Validate every point before running any of them.
  std::vector<ExperimentConfig> configs;
  for (double v : values) {
    configs.push_back(apply_axis(cfg, axis, v));
    configs.back().validate();
  }
  make_dir(dir);
  std::string combined = "value,metric,result\n";
  json runs = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string name = std::string(to_string(axis)) + "=" + format_double(values[i]);
    const RunResult r = run_experiment(configs[i], dir / name);
    const json& s = r.summary;
    const double rounds_done = std::max(1, r.completed_rounds + r.aborted_rounds);
    std::vector<std::pair<std::string, json>> metrics = {
        {"completed_rounds", s["completed_rounds"]},
        {"aborted_rounds", s["aborted_rounds"]},
        {"mean_wv_honest", s["mean_wv"]["honest"]},
        {"mean_wv_malicious", s["mean_wv"]["malicious"]},
        {"hashed_bytes_per_round", s["hcds"]["hashed_bytes"].get<double>() / rounds_done},
        {"signature_verifications_per_round",
         s["hcds"]["signature_verifications"].get<double>() / rounds_done},
        {"plagiarized_accepted", s["adversary"]["plagiarized_accepted"]},
        {"final_loss", s["final_loss"]},
    };
    if (!s["mean_wv"]["honest"].is_null() && !s["mean_wv"]["malicious"].is_null()) {
      metrics.emplace_back("wv_gap",
                           s["mean_wv"]["honest"].get<double>() - s["mean_wv"]["malicious"].get<double>());
    }
    for (const auto& [metric, value] : metrics) {
      if (value.is_null()) continue;
      combined += format_double(values[i]) + "," + metric + "," + format_double(value.get<double>()) + "\n";
    }
    runs.push_back(name);
  }
  write_file(dir / "combined.csv", combined);
  json meta = {{"axis", to_string(axis)},
               {"values", values},
               {"seed", cfg.seed},
               {"seed_policy",
                "every value reuses network.seed; per-node and per-round streams are derived from it, so "
                "values differ only in the swept parameter"},
               {"runs", runs}};
  write_file(dir / "sweep.json", meta.dump(2) + "\n");
  return meta;
}

const std::vector<std::string>& attack_presets() {
  static const std::vector<std::string> presets = {"plagiarism-copy", "plagiarism-edit", "plagiarism-merge",
                                                   "digest-copy",     "bribery-ta",      "bribery-ra"};
  return presets;
}

ExperimentConfig apply_attack_preset(const ExperimentConfig& cfg, const std::string& preset) {
  ExperimentConfig c = cfg;
  c.profiles.clear();
  c.bribed = BribedSpec{};
  auto plagiarists = [&](PlagiarismStrategy s) {
    const int count = std::max(1, c.n_nodes / 5);
    for (NodeId node = c.n_nodes - count + 1; node <= c.n_nodes; ++node) {
      AdversaryProfile p;
      p.node_id = node;
      p.kind = AdversaryKind::kPlagiarist;
      p.plagiarism_strategy = s;
      p.cbm = 1.0;
      c.profiles.push_back(p);
    }
  };
  if (preset == "plagiarism-copy") {
    plagiarists(PlagiarismStrategy::kCopyReveal);
  } else if (preset == "plagiarism-edit") {
    plagiarists(PlagiarismStrategy::kEditReveal);
  } else if (preset == "plagiarism-merge") {
    plagiarists(PlagiarismStrategy::kMergeReveals);
  } else if (preset == "digest-copy") {
    plagiarists(PlagiarismStrategy::kDigestCopy);
    c.consensus.hcds.phase_barrier = false;
  } else if (preset == "bribery-ta" || preset == "bribery-ra") {
    c.bribed.fraction = 0.2;
    c.bribed.cbm = 0.7;
    c.bribed.vote_strategy = preset == "bribery-ta" ? VoteStrategy::kTargeted : VoteStrategy::kRandom;
  } else {
    throw Error(ErrorCode::kConfig, "unknown attack preset '" + preset + "'");
  }
  return c;
}

IncentiveMode parse_incentive_mode(const std::string& s) {
  if (s == "fix_F") return IncentiveMode::kFixF;
  if (s == "fix_delta") return IncentiveMode::kFixDelta;
  if (s == "equilibrium") return IncentiveMode::kEquilibrium;
  throw Error(ErrorCode::kConfig, "unknown incentive mode '" + s + "'");
}

std::vector<CurvePoint> curve_utp_vs_delta(const IncentiveConfig& cfg) {
  const IncentiveParams p = cfg.params();
  std::vector<CurvePoint> out;
  for (double d : cfg.delta_range.points()) out.push_back({d, utility_publisher(d, cfg.fixed_F, p)});
  return out;
}

std::vector<CurvePoint> curve_utp_vs_F(const IncentiveConfig& cfg) {
  const IncentiveParams p = cfg.params();
  std::vector<CurvePoint> out;
  for (double F : cfg.F_range.points()) out.push_back({F, utility_publisher(cfg.fixed_delta, F, p)});
  return out;
}

std::vector<CurvePoint> curve_ui_vs_f(const IncentiveConfig& cfg) {
  const IncentiveParams p = cfg.params();
  std::vector<CurvePoint> out;
  for (double f : cfg.f_range.points()) {
    out.push_back({f, utility_node(f, cfg.sum_f_others, cfg.fixed_delta, p.gamma[0], p.mu[0])});
  }
  return out;
}

std::vector<CurvePoint> curve_ui_vs_delta(const IncentiveConfig& cfg) {
  const IncentiveParams p = cfg.params();
  std::vector<CurvePoint> out;
  for (double d : cfg.delta_range.points()) {
    out.push_back({d, utility_node(cfg.fixed_f_i, cfg.sum_f_others, d, p.gamma[0], p.mu[0])});
  }
  return out;
}

CurvePoint curve_peak(const std::vector<CurvePoint>& curve) {
  if (curve.empty()) throw Error(ErrorCode::kEmptyInput, "curve_peak: empty curve");
  CurvePoint best = curve.front();
  for (const auto& p : curve) {
    if (p.y > best.y) best = p;
  }
  return best;
}

json incentive_report(const IncentiveConfig& cfg, IncentiveMode mode, const fs::path& dir) {
  cfg.validate();
  const IncentiveParams params = cfg.params();
  make_dir(dir);
  json report;
  json warnings = json::array();
  auto count_nonpositive = [&](const std::vector<CurvePoint>& curve, const char* what) {
    const auto bad = std::count_if(curve.begin(), curve.end(), [](const CurvePoint& p) { return p.y <= 0.0; });
    if (bad) {
      warnings.push_back(std::string(what) + ": " + std::to_string(bad) +
                         " point(s) violate U_tp > 0 (outside -sqrt(B) < lambda*delta/F - phi < sqrt(B))");
    }
  };

  switch (mode) {
    case IncentiveMode::kFixF: {
      report["mode"] = "fix_F";
      const auto utp = curve_utp_vs_delta(cfg);
      const auto ui = curve_ui_vs_delta(cfg);
      count_nonpositive(utp, "utp_vs_delta");
      write_file(dir / "utp_vs_delta.csv", curve_csv(utp, "U_tp"));
      write_file(dir / "ui_vs_delta.csv", curve_csv(ui, "U_i"));
      report["fixed_F"] = cfg.fixed_F;
      report["utp_vs_delta_peak"] = peak_json(utp);
      report["optimal_delta"] = optimal_delta(cfg.fixed_F, params);
      report["utp_at_optimal_delta"] = utility_publisher(optimal_delta(cfg.fixed_F, params), cfg.fixed_F, params);
      break;
    }
    case IncentiveMode::kFixDelta: {
      report["mode"] = "fix_delta";
      const auto ui = curve_ui_vs_f(cfg);
      const auto utp = curve_utp_vs_F(cfg);
      count_nonpositive(utp, "utp_vs_F");
      write_file(dir / "ui_vs_f.csv", curve_csv(ui, "U_i"));
      write_file(dir / "utp_vs_F.csv", curve_csv(utp, "U_tp"));
      report["fixed_delta"] = cfg.fixed_delta;
      report["ui_vs_f_peak"] = peak_json(ui);
      report["best_response"] = best_response(cfg.sum_f_others, cfg.fixed_delta, params.gamma[0], params.mu[0],
                                              cfg.tol);
      report["utp_vs_F_peak"] = peak_json(utp);
      break;
    }
    case IncentiveMode::kEquilibrium: {
      report["mode"] = "equilibrium";
      json eq;
      try {
        const StackelbergResult r = stackelberg_equilibrium(params, cfg.tol, cfg.delta0);
        eq["trajectory"] = r.trajectory;
        if (r.outcome == StackelbergResult::Outcome::kBoundary) {
          eq["outcome"] = "boundary";
          eq["note"] = r.note;
        } else {
          eq["outcome"] = "equilibrium";
          eq["delta"] = r.delta;
          eq["F"] = r.F;
          eq["f"] = r.f;
          eq["utp"] = utility_publisher(r.delta, r.F, params);
          std::vector<double> foc;
          for (int i = 0; i < params.n(); ++i) {
            const double fi = r.f[static_cast<std::size_t>(i)];
            const double others = r.F - fi;
            foc.push_back(r.delta * others / (r.F * r.F) - 2.0 * params.cost(i) * fi);
          }
          eq["foc_residuals"] = foc;
          if (!publisher_utility_positive(r.delta, r.F, params)) warnings.push_back("equilibrium violates U_tp > 0");
        }
      } catch (const NonConvergenceError& e) {
        eq["outcome"] = "diverged";
        eq["error"] = e.what();
        eq["trajectory"] = e.trajectory();
        report["equilibrium"] = eq;
        report["warnings"] = warnings;
        write_file(dir / "equilibrium.json", report.dump(2) + "\n");
        throw;
      }
      report["equilibrium"] = eq;
      write_file(dir / "equilibrium.json", eq.dump(2) + "\n");
      break;
    }
  }
  report["warnings"] = warnings;
  write_file(dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace pofel
