#include <doctest.h>

#include <fstream>
#include <sstream>

#include "pofel/block_codec.hpp"
#include "pofel/experiment.hpp"

using namespace pofel;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(int n = 6, int rounds = 3) {
  ExperimentConfig c;
  c.n_nodes = n;
  c.rounds = rounds;
  c.fel.model_dim = 8;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pofel_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-1.5e-7) == "-1.5e-07");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("run artifacts are deterministic and shaped as documented") {
  const ExperimentConfig c = small();
  const RunArtifacts a = execute_run(c);
  const RunArtifacts b = execute_run(c);
  CHECK(a.rounds_csv == b.rounds_csv);
  CHECK(a.scores_csv == b.scores_csv);
  CHECK(a.ledger_jsonl == b.ledger_jsonl);
  CHECK(a.completed_rounds == 3);

  const auto rows = lines(a.rounds_csv);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "round,leader,s_1,s_2,s_3,s_4,s_5,s_6,advotes_1,advotes_2,advotes_3,advotes_4,advotes_5,advotes_6");
  CHECK(lines(a.scores_csv).size() == 1 + 3 * 6);
  CHECK(lines(a.scores_csv)[0] == "round,node,vote,score,chs,wv");
  CHECK(lines(a.ledger_jsonl).size() == 3);

  std::istringstream in(a.ledger_jsonl);
  CHECK(read_ledger_jsonl(in).size() == 3);
  CHECK(a.summary["leader_histogram"].size() == 6);
  CHECK(a.summary["completed_rounds"] == 3);
}

TEST_CASE("run_experiment writes every artifact") {
  const fs::path dir = scratch("run");
  const RunResult r = run_experiment(small(), dir);
  for (const char* f : {"ledger.jsonl", "rounds.csv", "scores.csv", "summary.json", "hcds_transcript.jsonl", "config.json"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(config_to_json(load_config(dir / "config.json")) == config_to_json(small()));
  CHECK(json::parse(slurp(dir / "summary.json")) == r.summary);
  fs::remove_all(dir);
}

TEST_CASE("sweep writes one directory per value and a combined table") {
  const fs::path dir = scratch("sweep");
  const json meta = sweep_experiment(small(5, 2), SweepAxis::kNonceLen, {16, 32, 48}, dir);
  CHECK(meta["runs"].size() == 3);
  for (const char* d : {"nonce_len=16", "nonce_len=32", "nonce_len=48"}) CHECK(fs::exists(dir / d / "summary.json"));
  const auto rows = lines(slurp(dir / "combined.csv"));
  CHECK(rows[0] == "value,metric,result");

  // Hashed bytes per round grow linearly with the nonce: one preimage per honest reveal.
  std::map<double, double> hashed;
  for (const auto& row : rows) {
    if (row.find(",hashed_bytes_per_round,") == std::string::npos) continue;
    const auto c1 = row.find(','), c2 = row.rfind(',');
    hashed[std::stod(row.substr(0, c1))] = std::stod(row.substr(c2 + 1));
  }
  REQUIRE(hashed.size() == 3);
  CHECK(hashed[32] - hashed[16] == doctest::Approx(hashed[48] - hashed[32]));
  CHECK(hashed[32] - hashed[16] == doctest::Approx(5 * 16));
  CHECK(hashed[16] == doctest::Approx(5 * (16 + 8 + 8 * 8)));
  CHECK(json::parse(slurp(dir / "sweep.json")).contains("seed_policy"));
  fs::remove_all(dir);
}

TEST_CASE("sweep validates every value before running") {
  const fs::path dir = scratch("sweep_bad");
  CHECK_THROWS_AS(sweep_experiment(small(), SweepAxis::kNonceLen, {32, 4}, dir), Error);
  CHECK_FALSE(fs::exists(dir));
  CHECK_THROWS_AS(parse_sweep_axis("beta"), Error);
}

TEST_CASE("attack presets") {
  ExperimentConfig base = small(10, 4);
  for (const auto& name : attack_presets()) {
    const ExperimentConfig c = apply_attack_preset(base, name);
    CHECK_NOTHROW(c.validate());
    const RunArtifacts a = execute_run(c);
    CHECK(a.summary["adversary"]["plagiarized_accepted"] == 0);
    CHECK(a.completed_rounds == 4);
  }
  CHECK_FALSE(apply_attack_preset(base, "digest-copy").consensus.hcds.phase_barrier);
  CHECK_THROWS_AS(apply_attack_preset(base, "nope"), Error);
}

TEST_CASE("incentive curves peak where the closed forms say") {
  IncentiveConfig ic;
  const CurvePoint utp = curve_peak(curve_utp_vs_delta(ic));
  CHECK(utp.x == doctest::Approx(5000.0));
  CHECK(utp.y == doctest::Approx(500.0));
  const CurvePoint ui = curve_peak(curve_ui_vs_f(ic));
  CHECK(std::abs(ui.x - 45.72) < 0.011);
  CHECK(curve_ui_vs_delta(ic).front().y < curve_ui_vs_delta(ic).back().y);
  const auto utpF = curve_utp_vs_F(ic);
  CHECK(curve_peak(utpF).x == doctest::Approx(1000.0));
}

TEST_CASE("incentive report files") {
  const fs::path dir = scratch("incentive");
  IncentiveConfig ic;
  const json fixF = incentive_report(ic, IncentiveMode::kFixF, dir / "f");
  CHECK(fs::exists(dir / "f" / "utp_vs_delta.csv"));
  CHECK(lines(slurp(dir / "f" / "utp_vs_delta.csv"))[0] == "x,U_tp");
  CHECK(fixF["optimal_delta"] == 5000.0);
  const json fixD = incentive_report(ic, IncentiveMode::kFixDelta, dir / "d");
  CHECK(fs::exists(dir / "d" / "ui_vs_f.csv"));
  CHECK_FALSE(fixD["warnings"].empty());
  const json eq = incentive_report(ic, IncentiveMode::kEquilibrium, dir / "e");
  CHECK(eq["equilibrium"]["outcome"] == "equilibrium");
  CHECK(std::abs(eq["equilibrium"]["delta"].get<double>() - 250.0) < 1e-5);
  ic.n_nodes = 1;
  CHECK(incentive_report(ic, IncentiveMode::kEquilibrium, dir / "b")["equilibrium"]["outcome"] == "boundary");
  CHECK_THROWS_AS(parse_incentive_mode("fixF"), Error);
  fs::remove_all(dir);
}

}  // TEST_SUITE
