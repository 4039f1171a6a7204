#pragma once

// Hash-based commitment with digital signatures: a two-phase commit/reveal
// exchange of model weights with per-record verification.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pofel/crypto.hpp"
#include "pofel/model_core.hpp"
#include "pofel/rng.hpp"

namespace pofel {

struct HcdsOptions {
  std::size_t nonce_len = 32;
  /// Hash H(node_id || nonce || weights) instead of H(nonce || weights).
  bool bind_identity = false;
  /// Commits stay invisible and reveals are held back until the commit phase closes.
  bool phase_barrier = true;
  /// Idle/delivery steps a phase may take before missing nodes are no-shows.
  int timeout_steps = 64;
};

struct CommitRecord {
  NodeId node_id = 0;
  std::uint64_t round = 0;
  Digest digest{};
  Signature tag{};
};

struct RevealRecord {
  NodeId node_id = 0;
  std::uint64_t round = 0;
  Bytes nonce;
  ModelWeights weights;
  Signature tag{};
};

/// Private opening kept by the committer until the reveal phase.
struct Opening {
  Bytes nonce;
  ModelWeights weights;
};

struct Commitment {
  CommitRecord record;
  Opening opening;

  RevealRecord reveal() const {
    return {record.node_id, record.round, opening.nonce, opening.weights, record.tag};
  }
};

enum class RejectReason {
  kNone,
  kBadSignature,
  kHashMismatch,
  kNoPriorCommit,
  kDuplicateDigest,
  kNoShow,
  kWrongRound,
};

const char* to_string(RejectReason reason);

struct Verdict {
  bool accepted = false;
  RejectReason reason = RejectReason::kNone;

  static Verdict accept() { return {true, RejectReason::kNone}; }
  static Verdict reject(RejectReason r) { return {false, r}; }
  bool operator==(const Verdict&) const = default;
  std::string str() const;
};

/// Canonical weight encoding: u64 BE dimension then IEEE-754 binary64 BE values.
Bytes encode_weights(const ModelWeights& weights);
void encode_weights_into(Bytes& out, const ModelWeights& weights);

Digest commitment_digest(NodeId node_id, std::span<const std::uint8_t> nonce,
                         const ModelWeights& weights, bool bind_identity,
                         std::uint64_t* hashed_bytes = nullptr);

Commitment commit(const ModelWeights& weights, const KeyPair& key, std::uint64_t round,
                  const HcdsOptions& options, Rng& rng);
/// Commit with a caller-supplied nonce (test vectors, replay).
Commitment commit_with_nonce(const ModelWeights& weights, const KeyPair& key, std::uint64_t round,
                             Bytes nonce, bool bind_identity);

Verdict verify_commit(const CommitRecord& rec, const PublicKey& pk);
Verdict verify_reveal(const RevealRecord& rev, const CommitRecord* committed, const PublicKey& pk,
                      bool bind_identity, std::uint64_t* hashed_bytes = nullptr);

enum class Phase { kCommitting, kRevealing, kComplete };

struct NodeVerdict {
  Verdict verdict;
  bool duplicate = false;
};

struct HcdsStats {
  std::uint64_t signature_verifications = 0;
  std::uint64_t hash_evaluations = 0;
  std::uint64_t hashed_bytes = 0;
};

struct TranscriptEntry {
  std::variant<CommitRecord, RevealRecord> record;
  /// Committed digest, or the recomputed preimage hash for a reveal.
  Digest digest{};
  Verdict verdict;
  bool duplicate = false;
};

using HcdsMessage = std::variant<CommitRecord, RevealRecord>;

/// One round of commit/reveal among a known participant set. Confined to a
/// single event loop; messages are processed in delivery order.
class HcdsSession {
 public:
  HcdsSession(std::uint64_t round, std::map<NodeId, PublicKey> participants, HcdsOptions options);

  void deliver(const HcdsMessage& message);
  /// One idle simulation step; closes the current phase on timeout.
  void tick();
  /// Marks every node still without a verdict as a no-show.
  void finish();

  Phase phase() const { return phase_; }
  std::uint64_t round() const { return round_; }
  const HcdsOptions& options() const { return options_; }

  /// Commits an outside observer can see right now.
  std::vector<CommitRecord> visible_commits() const;
  /// Accepted reveals so far.
  std::vector<RevealRecord> visible_reveals() const;

  const std::map<NodeId, NodeVerdict>& verdicts() const { return verdicts_; }
  std::vector<NodeId> accepted_nodes() const;
  const RevealRecord* accepted_reveal(NodeId node) const;
  const HcdsStats& stats() const { return stats_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

  /// Each receiver runs DVerify on every other sender's commit.
  std::size_t verifications_per_node() const { return participants_.size() - 1; }

 private:
  void on_commit(const CommitRecord& rec);
  void on_reveal(const RevealRecord& rec);
  void close_commit_phase();
  void maybe_complete();
  void step();
  bool has_final_verdict(NodeId node) const;

  std::uint64_t round_;
  std::map<NodeId, PublicKey> participants_;
  HcdsOptions options_;
  Phase phase_ = Phase::kCommitting;
  int phase_steps_ = 0;

  std::vector<NodeId> commit_order_;
  std::map<NodeId, CommitRecord> commits_;
  std::vector<RevealRecord> held_reveals_;
  std::map<NodeId, RevealRecord> reveals_;
  std::map<NodeId, NodeVerdict> verdicts_;
  std::map<NodeId, bool> duplicate_;
  HcdsStats stats_;
  std::vector<TranscriptEntry> transcript_;
};

/// Feeds `inbox` in order, idles until both phases close, and returns verdicts.
std::map<NodeId, NodeVerdict> session_run(HcdsSession& session,
                                          std::span<const HcdsMessage> inbox);

/// One JSON object per record: {node_id, round, phase, digest, nonce, weights, tag, verdict}.
nlohmann::json transcript_entry_json(const TranscriptEntry& entry);

}  // namespace pofel
