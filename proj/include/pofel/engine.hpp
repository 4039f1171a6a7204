#pragma once

// Deterministic single-threaded round engine: FEL clusters produce models,
// commit/reveal exchange, model evaluation, weighted tally, block append.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pofel/adversary.hpp"
#include "pofel/btsv.hpp"
#include "pofel/consensus.hpp"
#include "pofel/fel_sim.hpp"
#include "pofel/hcds.hpp"

namespace pofel {

struct ConsensusParams {
  double g_max = 0.99;
  BtsvParams btsv;
  HcdsOptions hcds;
  LedgerMode ledger_mode = LedgerMode::kFullModels;
  /// Recompute model evaluation at every honest node and require equality.
  bool verify_unanimity = false;
};

struct EngineConfig {
  int n_nodes = 50;
  std::uint64_t seed = 1;
  FelConfig fel;
  ConsensusParams consensus;
  std::vector<AdversaryProfile> adversaries;
  bool allow_majority = false;
  /// Held-out set size for global-loss tracking (toy classifier only).
  int holdout_size = 500;

  void validate() const;
};

struct RoundRecord {
  std::uint64_t round = 0;
  bool aborted = false;
  std::string abort_reason;

  std::map<NodeId, NodeVerdict> hcds_verdicts;
  HcdsStats hcds_stats;
  std::size_t dverify_per_node = 0;
  std::vector<TranscriptEntry> transcript;

  RoundInputs inputs;
  std::map<NodeId, double> similarity;  // survivors only
  std::optional<TallyResult> tally;
  NodeId leader = 0;

  // Every node, including those excluded this round.
  std::map<NodeId, double> score;
  std::map<NodeId, double> chs;
  std::map<NodeId, double> wv;
  std::map<NodeId, NodeId> vote;  // survivors only

  std::set<NodeId> adversaries_acted;
  std::optional<double> global_loss;  // toy classifier
};

class RoundEngine {
 public:
  explicit RoundEngine(EngineConfig cfg);

  /// Runs the next round. A round with fewer than two HCDS survivors is
  /// returned with `aborted` set and leaves ledger and scores untouched.
  RoundRecord run_round();
  /// As run_round, but throws Error(kNoQuorum) on abort.
  Block run_round_strict();

  const EngineConfig& config() const { return cfg_; }
  const Ledger& ledger() const { return ledger_; }
  const ScoreLedger& scores() const { return scores_; }
  const ModelWeights& global_model() const { return global_; }
  const std::vector<RoundInputs>& round_inputs() const { return inputs_; }
  bool is_adversary(NodeId node) const { return adversary_index_.count(node) != 0; }
  const KeyPair& key(NodeId node) const { return keys_.at(static_cast<std::size_t>(node - 1)); }
  std::optional<double> initial_loss() const { return initial_loss_; }
  std::optional<double> holdout_loss(const ModelWeights& w) const;

 private:
  const AdversaryProfile* adversary(NodeId node) const;

  EngineConfig cfg_;
  std::vector<FelCluster> clusters_;
  std::vector<KeyPair> keys_;
  std::map<NodeId, std::size_t> adversary_index_;
  std::map<NodeId, Rng> adversary_rng_;
  Ledger ledger_;
  ScoreLedger scores_;
  ModelWeights global_;
  std::vector<RoundInputs> inputs_;
  std::uint64_t attempts_ = 0;
  std::optional<ClientDataset> holdout_;
  std::optional<double> initial_loss_;
};

}  // namespace pofel
