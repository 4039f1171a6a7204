#pragma once

// Scripted malicious behaviour: model plagiarists against the commit/reveal
// exchange and bribed voters against the tally.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pofel/btsv.hpp"
#include "pofel/hcds.hpp"

namespace pofel {

enum class AdversaryKind { kPlagiarist, kBribedVoter };
enum class PlagiarismStrategy { kCopyReveal, kEditReveal, kMergeReveals, kDigestCopy };
enum class VoteStrategy { kTargeted, kRandom };

struct AdversaryProfile {
  NodeId node_id = 0;
  AdversaryKind kind = AdversaryKind::kBribedVoter;
  PlagiarismStrategy plagiarism_strategy = PlagiarismStrategy::kCopyReveal;
  VoteStrategy vote_strategy = VoteStrategy::kTargeted;
  double cbm = 1.0;
  std::optional<NodeId> target_id;

  void validate() const;
};

const char* to_string(AdversaryKind k);
const char* to_string(PlagiarismStrategy s);
const char* to_string(VoteStrategy s);
AdversaryKind parse_adversary_kind(const std::string& s);
PlagiarismStrategy parse_plagiarism_strategy(const std::string& s);
VoteStrategy parse_vote_strategy(const std::string& s);

/// Throws unless adversaries are a strict minority (or `allow_majority`).
void check_adversary_fraction(std::span<const AdversaryProfile> profiles, int n_nodes,
                              bool allow_majority);

/// Per-round state of one plagiarism attempt.
struct PlagiaristAttempt {
  CommitRecord commit;
  Opening junk;                         // what was actually committed when not copying a digest
  std::optional<NodeId> copied_digest;  // DIGEST_COPY victim, if its digest was visible
};

/// Commit step. Junk is the all-zero model; DIGEST_COPY echoes the first
/// visible victim digest under the attacker's own signature.
PlagiaristAttempt plagiarist_commit(const AdversaryProfile& profile,
                                    std::span<const CommitRecord> visible_commits,
                                    const KeyPair& key, std::uint64_t round, int model_dim,
                                    const HcdsOptions& options, Rng& rng);

/// Reveal step: substitutes a copied, edited or merged victim model. Returns
/// nothing when there is no victim reveal to plagiarise.
std::optional<RevealRecord> plagiarist_reveal(const AdversaryProfile& profile,
                                              const PlagiaristAttempt& attempt,
                                              std::span<const RevealRecord> visible_reveals,
                                              Rng& rng);

struct BribedVote {
  VoteSubmission submission;
  bool acted = false;  // behaved maliciously this round
};

/// With probability cbm replaces the honest vote (TARGETED: target_id,
/// RANDOM: uniform over `candidates`); the prediction is always honest-format
/// around the cast vote.
BribedVote bribed_vote(const AdversaryProfile& profile, NodeId voter_id, std::uint64_t round,
                       NodeId honest_vote, std::span<const NodeId> candidates, double g_max,
                       Rng& rng);

}  // namespace pofel
