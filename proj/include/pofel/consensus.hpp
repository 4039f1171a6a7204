#pragma once

// Model evaluation, blocks, the append-only ledger and block verification.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pofel/btsv.hpp"
#include "pofel/crypto.hpp"
#include "pofel/model_core.hpp"

namespace pofel {

struct Evaluation {
  VoteSubmission submission;
  ModelWeights global_model;
  Eigen::VectorXd similarities;  // per model, same order as the input
};

/// Aggregates the accepted models into gw, scores every model by cosine
/// similarity to gw and votes for the most similar one (ties to the lowest
/// node id). `node_ids` must be ascending.
Evaluation model_evaluation(std::span<const NodeId> node_ids, std::span<const ModelWeights> models,
                            std::span<const std::int64_t> sizes, NodeId self_id, double g_max,
                            std::uint64_t round);

enum class LedgerMode { kFullModels, kDigestsOnly };

struct ModelEntry {
  NodeId node_id = 0;
  std::int64_t size = 0;
  ModelWeights weights;  // empty in digests-only mode
  Digest model_digest{};  // SHA-256 of the canonical weight encoding

  bool operator==(const ModelEntry&) const = default;
};

struct TallyRecord {
  std::vector<NodeId> participants;  // ascending
  std::vector<NodeId> votes;         // per participant
  std::vector<double> scores;
  std::vector<double> weights;
  std::vector<double> adjusted_votes;

  bool operator==(const TallyRecord&) const = default;
};

struct Block {
  std::uint64_t round = 0;
  NodeId leader_id = 0;
  LedgerMode mode = LedgerMode::kFullModels;
  std::vector<ModelEntry> models;
  ModelWeights global_model;
  TallyRecord tally;
  Digest prev_digest{};
  Digest digest{};

  bool operator==(const Block&) const = default;
};

/// Everything except `digest`, in a fixed binary layout.
Bytes canonical_encoding(const Block& block);
Digest compute_block_digest(const Block& block);

Digest model_digest(const ModelWeights& weights);

/// Public per-round inputs a verifier recomputes the block from.
struct RoundInputs {
  std::uint64_t round = 0;
  std::vector<NodeId> participants;  // ascending
  std::vector<ModelWeights> models;
  std::vector<std::int64_t> sizes;
  std::vector<VoteSubmission> submissions;  // one per participant, participant order
};

Block build_block(const RoundInputs& inputs, const ModelWeights& global_model,
                  const TallyResult& tally, const Digest& prev_digest, LedgerMode mode);

class Ledger {
 public:
  static Digest genesis_digest() { return Digest{}; }

  /// Throws unless `block` extends the head (round + 1, prev_digest, own digest).
  void append(Block block);
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  Digest head_digest() const { return blocks_.empty() ? genesis_digest() : blocks_.back().digest; }
  std::uint64_t next_round() const { return blocks_.empty() ? 1 : blocks_.back().round + 1; }

 private:
  std::vector<Block> blocks_;
};

enum class BlockReject { kNone, kBadChain, kBadAggregate, kBadLeader, kBadTally, kBadDigest, kBadEncoding };

const char* to_string(BlockReject r);

struct BlockVerdict {
  bool accepted = false;
  BlockReject reason = BlockReject::kNone;
  std::string detail;

  std::string str() const;
};

/// Recomputes gw, the tally, the leader and both digests from the public
/// inputs and the score history preceding this round.
BlockVerdict verify_block(const Block& block, const Digest& expected_prev,
                          std::uint64_t expected_round, const RoundInputs& inputs,
                          const ScoreLedger& prior_scores, const BtsvParams& params);

/// Walks the chain from genesis, verifying each block against its inputs.
/// Returns the first failure, or ACCEPTED.
BlockVerdict verify_chain(std::span<const Block> blocks, std::span<const RoundInputs> inputs,
                          const BtsvParams& params, std::size_t* failed_index = nullptr);

}  // namespace pofel
