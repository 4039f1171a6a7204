#include "pofel/adversary.hpp"

#include <algorithm>

namespace pofel {

const char* to_string(AdversaryKind k) {
  return k == AdversaryKind::kPlagiarist ? "PLAGIARIST" : "BRIBED_VOTER";
}

const char* to_string(PlagiarismStrategy s) {
  switch (s) {
    case PlagiarismStrategy::kCopyReveal: return "COPY_REVEAL";
    case PlagiarismStrategy::kEditReveal: return "EDIT_REVEAL";
    case PlagiarismStrategy::kMergeReveals: return "MERGE_REVEALS";
    case PlagiarismStrategy::kDigestCopy: return "DIGEST_COPY";
  }
  return "?";
}

const char* to_string(VoteStrategy s) {
  return s == VoteStrategy::kTargeted ? "TARGETED" : "RANDOM";
}

AdversaryKind parse_adversary_kind(const std::string& s) {
  if (s == "PLAGIARIST") return AdversaryKind::kPlagiarist;
  if (s == "BRIBED_VOTER") return AdversaryKind::kBribedVoter;
  throw Error(ErrorCode::kConfig, "unknown adversary kind '" + s + "'");
}

PlagiarismStrategy parse_plagiarism_strategy(const std::string& s) {
  for (auto v : {PlagiarismStrategy::kCopyReveal, PlagiarismStrategy::kEditReveal,
                 PlagiarismStrategy::kMergeReveals, PlagiarismStrategy::kDigestCopy}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorCode::kConfig, "unknown plagiarism strategy '" + s + "'");
}

VoteStrategy parse_vote_strategy(const std::string& s) {
  if (s == "TARGETED") return VoteStrategy::kTargeted;
  if (s == "RANDOM") return VoteStrategy::kRandom;
  throw Error(ErrorCode::kConfig, "unknown vote strategy '" + s + "'");
}

void AdversaryProfile::validate() const {
  const std::string who = "adversary node " + std::to_string(node_id);
  if (!(cbm >= 0.0 && cbm <= 1.0)) throw Error(ErrorCode::kConfig, who + ": cbm must lie in [0, 1]");
  if (kind == AdversaryKind::kBribedVoter && vote_strategy == VoteStrategy::kTargeted && !target_id) {
    throw Error(ErrorCode::kConfig, who + ": TARGETED requires target_id");
  }
}

void check_adversary_fraction(std::span<const AdversaryProfile> profiles, int n_nodes,
                              bool allow_majority) {
  std::vector<NodeId> ids;
  for (const auto& p : profiles) {
    p.validate();
    if (p.node_id < 1 || p.node_id > n_nodes) {
      throw Error(ErrorCode::kConfig, "adversary node " + std::to_string(p.node_id) +
                                          " outside [1, " + std::to_string(n_nodes) + "]");
    }
    if (p.target_id && (*p.target_id < 1 || *p.target_id > n_nodes)) {
      throw Error(ErrorCode::kConfig, "adversary target outside node range");
    }
    ids.push_back(p.node_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::kConfig, "adversary: node listed twice");
  }
  if (!allow_majority && 2 * ids.size() >= static_cast<std::size_t>(n_nodes)) {
    throw Error(ErrorCode::kConfig, "adversary: " + std::to_string(ids.size()) + " of " +
                                        std::to_string(n_nodes) +
                                        " nodes malicious; must be below 50% (set allow_majority to override)");
  }
}

PlagiaristAttempt plagiarist_commit(const AdversaryProfile& profile,
                                    std::span<const CommitRecord> visible_commits,
                                    const KeyPair& key, std::uint64_t round, int model_dim,
                                    const HcdsOptions& options, Rng& rng) {
  PlagiaristAttempt a;
  if (profile.plagiarism_strategy == PlagiarismStrategy::kDigestCopy) {
    for (const auto& c : visible_commits) {
      if (c.node_id == key.node_id || c.round != round) continue;
      a.copied_digest = c.node_id;
      a.commit = {key.node_id, round, c.digest, sign(c.digest, key)};
      return a;
    }
  }
  Commitment junk = commit(ModelWeights::Zero(model_dim), key, round, options, rng);
  a.commit = junk.record;
  a.junk = std::move(junk.opening);
  return a;
}

std::optional<RevealRecord> plagiarist_reveal(const AdversaryProfile& profile,
                                              const PlagiaristAttempt& attempt,
                                              std::span<const RevealRecord> visible_reveals,
                                              Rng& rng) {
  std::vector<const RevealRecord*> victims;
  for (const auto& r : visible_reveals) {
    if (r.node_id != attempt.commit.node_id) victims.push_back(&r);
  }
  if (victims.empty()) return std::nullopt;

  RevealRecord out;
  out.node_id = attempt.commit.node_id;
  out.round = attempt.commit.round;
  out.tag = attempt.commit.tag;

  auto pick = [&]() -> const RevealRecord& {
    std::uniform_int_distribution<std::size_t> d(0, victims.size() - 1);
    return *victims[d(rng)];
  };

  switch (profile.plagiarism_strategy) {
    case PlagiarismStrategy::kCopyReveal: {
      const auto& v = pick();
      out.nonce = v.nonce;
      out.weights = v.weights;
      break;
    }
    case PlagiarismStrategy::kEditReveal: {
      const auto& v = pick();
      std::normal_distribution<double> noise(0.0, 1e-3);
      out.nonce = attempt.junk.nonce.empty() ? v.nonce : attempt.junk.nonce;
      out.weights = v.weights;
      for (Eigen::Index d = 0; d < out.weights.size(); ++d) out.weights[d] += noise(rng);
      break;
    }
    case PlagiarismStrategy::kMergeReveals: {
      std::shuffle(victims.begin(), victims.end(), rng);
      const std::size_t k = std::min<std::size_t>(3, victims.size());
      out.weights = ModelWeights::Zero(victims.front()->weights.size());
      for (std::size_t i = 0; i < k; ++i) out.weights += victims[i]->weights;
      out.weights /= static_cast<double>(k);
      out.nonce = attempt.junk.nonce.empty() ? victims.front()->nonce : attempt.junk.nonce;
      break;
    }
    case PlagiarismStrategy::kDigestCopy: {
      const RevealRecord* v = nullptr;
      if (attempt.copied_digest) {
        for (const auto* r : victims) {
          if (r->node_id == *attempt.copied_digest) v = r;
        }
      }
      if (!v) v = &pick();
      out.nonce = v->nonce;
      out.weights = v->weights;
      break;
    }
  }
  return out;
}

BribedVote bribed_vote(const AdversaryProfile& profile, NodeId voter_id, std::uint64_t round,
                       NodeId honest_vote, std::span<const NodeId> candidates, double g_max,
                       Rng& rng) {
  BribedVote out;
  out.submission.voter_id = voter_id;
  out.submission.round = round;
  out.submission.vote = honest_vote;

  std::bernoulli_distribution act(profile.cbm);
  if (act(rng)) {
    out.acted = true;
    if (profile.vote_strategy == VoteStrategy::kTargeted) {
      out.submission.vote = *profile.target_id;
    } else {
      std::uniform_int_distribution<std::size_t> d(0, candidates.size() - 1);
      out.submission.vote = candidates[d(rng)];
    }
  }
  auto it = std::find(candidates.begin(), candidates.end(), out.submission.vote);
  if (it == candidates.end()) {
    // Target excluded this round; fall back to the honest vote.
    out.submission.vote = honest_vote;
    it = std::find(candidates.begin(), candidates.end(), honest_vote);
  }
  out.submission.prediction =
      honest_prediction(candidates.size(), static_cast<std::size_t>(it - candidates.begin()), g_max);
  return out;
}

}  // namespace pofel
