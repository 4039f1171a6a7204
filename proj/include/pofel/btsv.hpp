#pragma once

// Bayesian-Truth-Serum weighted voting: per-round BTS scores, windowed
// cumulative historical scores, sigmoid vote weights and the weighted tally.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pofel/model_core.hpp"

namespace pofel {

struct BtsvParams {
  double alpha = 1.0;
  double beta = 1.3;
  double theta = 0.4;
  double epsilon = 1.2;
  std::uint64_t window_c = 20;

  void validate() const;
};

/// A node's leader vote plus its prediction of the vote distribution.
/// `prediction[j]` refers to the j-th candidate in ascending node-id order.
struct VoteSubmission {
  NodeId voter_id = 0;
  std::uint64_t round = 0;
  NodeId vote = 0;
  Eigen::VectorXd prediction;
};

/// Honest-format prediction: g_max on `vote_index`, (1 - g_max)/(n - 1) elsewhere.
Eigen::VectorXd honest_prediction(std::size_t n, std::size_t vote_index, double g_max);

/// x̄_j: fraction of the n voters whose vote index equals j.
Eigen::VectorXd vote_shares(std::span<const int> votes, int n_candidates);

/// ȳ_j: geometric mean over voters (rows) of predicted shares (columns).
Eigen::VectorXd pred_geomeans(const Eigen::MatrixXd& predictions);

/// Information score plus alpha-weighted prediction score per voter, with
/// 0·ln(·) := 0. Rows of `predictions` are voters, columns candidates.
Eigen::VectorXd bts_scores(std::span<const int> votes, const Eigen::MatrixXd& predictions,
                           const BtsvParams& params);

/// Sum of history[max(0, k - c) .. k]; entries past the end count as zero.
double chs(std::span<const double> history, std::uint64_t k, std::uint64_t window_c);

/// beta / (1 + exp(-theta·chs - epsilon)).
double weight_of_vote(double chs_value, const BtsvParams& params);

/// Per-node round scores. Rounds never recorded for a node read as 0.
class ScoreLedger {
 public:
  void record(NodeId node, std::uint64_t round, double score);
  double score(NodeId node, std::uint64_t round) const;
  double chs(NodeId node, std::uint64_t round, std::uint64_t window_c) const;
  double weight(NodeId node, std::uint64_t round, const BtsvParams& params) const;
  std::span<const double> history(NodeId node) const;
  std::vector<NodeId> nodes() const;

  bool operator==(const ScoreLedger&) const = default;

 private:
  std::map<NodeId, std::vector<double>> scores_;
};

struct TallyResult {
  std::uint64_t round = 0;
  std::vector<NodeId> candidates;  // ascending
  std::vector<NodeId> voters;      // submission order
  std::vector<int> vote_index;     // per voter, into candidates
  Eigen::VectorXd vote_shares;     // per candidate
  Eigen::VectorXd pred_geomeans;   // per candidate
  Eigen::VectorXd scores;          // per voter
  Eigen::VectorXd chs;             // per voter
  Eigen::VectorXd weights;         // per voter
  Eigen::VectorXd adjusted_votes;  // per candidate
  NodeId leader = 0;
};

/// advotes_j = Σ_i weights_i·[vote_i == j].
Eigen::VectorXd weighted_count(std::span<const int> votes, const Eigen::VectorXd& weights,
                               int n_candidates);

/// Index of the largest entry; ties go to the lowest index.
int argmax_lowest(const Eigen::VectorXd& values);

/// Scores the submissions, records the scores in `ledger` for `round`, derives
/// CHS and WV per voter and elects argmax advotes (ties to the lowest id).
/// Voters and candidates are the same node set.
TallyResult tally(std::span<const VoteSubmission> submissions, ScoreLedger& ledger,
                  const BtsvParams& params, std::uint64_t round);

}  // namespace pofel
