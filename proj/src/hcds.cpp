#include "pofel/hcds.hpp"

#include <algorithm>

namespace pofel {

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kNone: return "none";
    case RejectReason::kBadSignature: return "bad-signature";
    case RejectReason::kHashMismatch: return "hash-mismatch";
    case RejectReason::kNoPriorCommit: return "no-prior-commit";
    case RejectReason::kDuplicateDigest: return "duplicate-digest";
    case RejectReason::kNoShow: return "no-show";
    case RejectReason::kWrongRound: return "wrong-round";
  }
  return "unknown";
}

std::string Verdict::str() const {
  return accepted ? "ACCEPTED" : std::string("REJECTED(") + to_string(reason) + ")";
}

void encode_weights_into(Bytes& out, const ModelWeights& weights) {
  out.reserve(out.size() + 8 + 8 * static_cast<std::size_t>(weights.size()));
  append_u64_be(out, static_cast<std::uint64_t>(weights.size()));
  for (Eigen::Index d = 0; d < weights.size(); ++d) append_f64_be(out, weights[d]);
}

Bytes encode_weights(const ModelWeights& weights) {
  Bytes out;
  encode_weights_into(out, weights);
  return out;
}

Digest commitment_digest(NodeId node_id, std::span<const std::uint8_t> nonce,
                         const ModelWeights& weights, bool bind_identity,
                         std::uint64_t* hashed_bytes) {
  Sha256 h;
  if (bind_identity) h.update_u64(static_cast<std::uint64_t>(node_id));
  h.update(nonce);
  h.update(encode_weights(weights));
  if (hashed_bytes) *hashed_bytes += h.bytes_hashed();
  return h.finish();
}

Commitment commit_with_nonce(const ModelWeights& weights, const KeyPair& key, std::uint64_t round,
                             Bytes nonce, bool bind_identity) {
  if (!all_finite(weights)) throw Error(ErrorCode::kNonFinite, "commit: non-finite weight");
  Commitment c;
  c.record.node_id = key.node_id;
  c.record.round = round;
  c.record.digest = commitment_digest(key.node_id, nonce, weights, bind_identity);
  c.record.tag = sign(c.record.digest, key);
  c.opening.nonce = std::move(nonce);
  c.opening.weights = weights;
  return c;
}

Commitment commit(const ModelWeights& weights, const KeyPair& key, std::uint64_t round,
                  const HcdsOptions& options, Rng& rng) {
  if (options.nonce_len < 16) {
    throw Error(ErrorCode::kInvalidArgument, "commit: nonce_len must be at least 16 bytes");
  }
  Bytes nonce(options.nonce_len);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& b : nonce) b = static_cast<std::uint8_t>(byte(rng));
  return commit_with_nonce(weights, key, round, std::move(nonce), options.bind_identity);
}

Verdict verify_commit(const CommitRecord& rec, const PublicKey& pk) {
  return verify_signature(rec.tag, pk, rec.digest) ? Verdict::accept()
                                                   : Verdict::reject(RejectReason::kBadSignature);
}

Verdict verify_reveal(const RevealRecord& rev, const CommitRecord* committed, const PublicKey& pk,
                      bool bind_identity, std::uint64_t* hashed_bytes) {
  if (committed == nullptr || committed->node_id != rev.node_id) {
    return Verdict::reject(RejectReason::kNoPriorCommit);
  }
  if (committed->round != rev.round) return Verdict::reject(RejectReason::kWrongRound);
  if (!all_finite(rev.weights)) return Verdict::reject(RejectReason::kHashMismatch);
  const Digest recomputed =
      commitment_digest(rev.node_id, rev.nonce, rev.weights, bind_identity, hashed_bytes);
  if (recomputed != committed->digest) return Verdict::reject(RejectReason::kHashMismatch);
  if (!verify_signature(rev.tag, pk, recomputed)) {
    return Verdict::reject(RejectReason::kBadSignature);
  }
  return Verdict::accept();
}

HcdsSession::HcdsSession(std::uint64_t round, std::map<NodeId, PublicKey> participants,
                         HcdsOptions options)
    : round_(round), participants_(std::move(participants)), options_(options) {
  if (participants_.empty()) throw Error(ErrorCode::kEmptyInput, "HcdsSession: no participants");
}

bool HcdsSession::has_final_verdict(NodeId node) const { return verdicts_.count(node) != 0; }

void HcdsSession::deliver(const HcdsMessage& message) {
  std::visit(
      [this](const auto& rec) {
        using T = std::decay_t<decltype(rec)>;
        if constexpr (std::is_same_v<T, CommitRecord>) {
          on_commit(rec);
        } else {
          on_reveal(rec);
        }
      },
      message);
}

void HcdsSession::on_commit(const CommitRecord& rec) {
  if (phase_ != Phase::kCommitting) return;  // late: already a no-show
  auto pk = participants_.find(rec.node_id);
  if (pk == participants_.end()) return;
  if (commits_.count(rec.node_id) || has_final_verdict(rec.node_id)) return;

  TranscriptEntry entry{rec, rec.digest, Verdict::accept(), false};
  if (rec.round != round_) {
    entry.verdict = Verdict::reject(RejectReason::kWrongRound);
  } else {
    ++stats_.signature_verifications;
    entry.verdict = verify_commit(rec, pk->second);
  }

  if (!entry.verdict.accepted) {
    verdicts_[rec.node_id] = {entry.verdict, false};
  } else {
    for (NodeId other : commit_order_) {
      if (commits_.at(other).digest == rec.digest) {
        duplicate_[other] = true;
        duplicate_[rec.node_id] = true;
        if (auto it = verdicts_.find(other); it != verdicts_.end()) it->second.duplicate = true;
      }
    }
    commits_.emplace(rec.node_id, rec);
    commit_order_.push_back(rec.node_id);
    entry.duplicate = duplicate_[rec.node_id];
    if (entry.duplicate && !options_.bind_identity) {
      // Later arrival loses the dispute.
      entry.verdict = Verdict::reject(RejectReason::kDuplicateDigest);
      verdicts_[rec.node_id] = {entry.verdict, true};
    }
  }
  transcript_.push_back(std::move(entry));

  const bool all_in = std::all_of(participants_.begin(), participants_.end(), [&](const auto& p) {
    return commits_.count(p.first) || has_final_verdict(p.first);
  });
  if (all_in) close_commit_phase();
}

void HcdsSession::on_reveal(const RevealRecord& rec) {
  if (phase_ == Phase::kComplete) return;
  if (phase_ == Phase::kCommitting && options_.phase_barrier) {
    held_reveals_.push_back(rec);
    return;
  }
  auto pk = participants_.find(rec.node_id);
  if (pk == participants_.end()) return;
  if (reveals_.count(rec.node_id)) return;

  TranscriptEntry entry{rec, {}, Verdict::accept(), duplicate_[rec.node_id]};
  if (auto it = verdicts_.find(rec.node_id); it != verdicts_.end()) {
    // Already rejected at commit time; record the attempt only.
    entry.verdict = it->second.verdict;
    transcript_.push_back(std::move(entry));
    return;
  }

  auto committed = commits_.find(rec.node_id);
  const CommitRecord* prior = committed == commits_.end() ? nullptr : &committed->second;
  if (prior) {
    ++stats_.hash_evaluations;
    ++stats_.signature_verifications;
    entry.digest = commitment_digest(rec.node_id, rec.nonce, rec.weights, options_.bind_identity,
                                     &stats_.hashed_bytes);
  }
  entry.verdict = verify_reveal(rec, prior, pk->second, options_.bind_identity);
  verdicts_[rec.node_id] = {entry.verdict, duplicate_[rec.node_id]};
  if (entry.verdict.accepted) reveals_.emplace(rec.node_id, rec);
  transcript_.push_back(std::move(entry));
  maybe_complete();
}

void HcdsSession::close_commit_phase() {
  if (phase_ != Phase::kCommitting) return;
  for (const auto& [node, pk] : participants_) {
    if (!commits_.count(node) && !has_final_verdict(node)) {
      verdicts_[node] = {Verdict::reject(RejectReason::kNoShow), false};
    }
  }
  phase_ = Phase::kRevealing;
  phase_steps_ = 0;
  auto held = std::move(held_reveals_);
  held_reveals_.clear();
  for (const auto& r : held) on_reveal(r);
  maybe_complete();
}

void HcdsSession::maybe_complete() {
  if (phase_ != Phase::kRevealing) return;
  const bool done = std::all_of(participants_.begin(), participants_.end(),
                                [&](const auto& p) { return has_final_verdict(p.first); });
  if (done) phase_ = Phase::kComplete;
}

void HcdsSession::tick() {
  ++phase_steps_;
  if (phase_steps_ < options_.timeout_steps) return;
  if (phase_ == Phase::kCommitting) {
    close_commit_phase();
  } else if (phase_ == Phase::kRevealing) {
    finish();
  }
}

void HcdsSession::finish() {
  close_commit_phase();
  for (const auto& [node, pk] : participants_) {
    if (!has_final_verdict(node)) {
      verdicts_[node] = {Verdict::reject(RejectReason::kNoShow), duplicate_[node]};
    }
  }
  phase_ = Phase::kComplete;
}

std::vector<CommitRecord> HcdsSession::visible_commits() const {
  std::vector<CommitRecord> out;
  if (phase_ == Phase::kCommitting && options_.phase_barrier) return out;
  for (NodeId n : commit_order_) out.push_back(commits_.at(n));
  return out;
}

std::vector<RevealRecord> HcdsSession::visible_reveals() const {
  std::vector<RevealRecord> out;
  for (const auto& e : transcript_) {
    if (const auto* r = std::get_if<RevealRecord>(&e.record); r && e.verdict.accepted) {
      out.push_back(*r);
    }
  }
  return out;
}

std::vector<NodeId> HcdsSession::accepted_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [node, v] : verdicts_) {
    if (v.verdict.accepted && reveals_.count(node)) out.push_back(node);
  }
  return out;
}

const RevealRecord* HcdsSession::accepted_reveal(NodeId node) const {
  auto it = reveals_.find(node);
  return it == reveals_.end() ? nullptr : &it->second;
}

std::map<NodeId, NodeVerdict> session_run(HcdsSession& session,
                                          std::span<const HcdsMessage> inbox) {
  for (const auto& m : inbox) session.deliver(m);
  while (session.phase() != Phase::kComplete) session.tick();
  return session.verdicts();
}

nlohmann::json transcript_entry_json(const TranscriptEntry& entry) {
  nlohmann::json j;
  std::visit(
      [&](const auto& rec) {
        using T = std::decay_t<decltype(rec)>;
        j["node_id"] = rec.node_id;
        j["round"] = rec.round;
        j["tag"] = to_base64(rec.tag);
        if constexpr (std::is_same_v<T, CommitRecord>) {
          j["phase"] = "commit";
          j["nonce"] = nullptr;
          j["weights"] = nullptr;
        } else {
          j["phase"] = "reveal";
          j["nonce"] = to_hex(rec.nonce);
          j["weights"] = std::vector<double>(rec.weights.data(), rec.weights.data() + rec.weights.size());
        }
      },
      entry.record);
  j["digest"] = to_hex(entry.digest);
  j["verdict"] = entry.verdict.str();
  j["duplicate"] = entry.duplicate;
  return j;
}

}  // namespace pofel
