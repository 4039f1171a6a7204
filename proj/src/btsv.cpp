#include "pofel/btsv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pofel {

void BtsvParams::validate() const {
  if (!(beta > 0.0)) throw Error(ErrorCode::kConfig, "consensus.beta: must be positive");
  if (!(theta > 0.0)) throw Error(ErrorCode::kConfig, "consensus.theta: must be positive");
  if (!std::isfinite(alpha)) throw Error(ErrorCode::kConfig, "consensus.alpha: must be finite");
  if (!std::isfinite(epsilon)) throw Error(ErrorCode::kConfig, "consensus.epsilon: must be finite");
}

Eigen::VectorXd honest_prediction(std::size_t n, std::size_t vote_index, double g_max) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "honest_prediction: need at least 2 candidates");
  if (!(g_max > 0.0 && g_max < 1.0)) throw Error(ErrorCode::kInvalidArgument, "g_max must lie in (0, 1)");
  Eigen::VectorXd p = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                (1.0 - g_max) / static_cast<double>(n - 1));
  p[static_cast<Eigen::Index>(vote_index)] = g_max;
  return p;
}

Eigen::VectorXd vote_shares(std::span<const int> votes, int n_candidates) {
  if (votes.empty()) throw Error(ErrorCode::kEmptyInput, "vote_shares: no votes");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_candidates);
  for (int v : votes) {
    if (v < 0 || v >= n_candidates) {
      throw Error(ErrorCode::kInvalidArgument, "vote_shares: vote index " + std::to_string(v) +
                                                   " outside [0, " + std::to_string(n_candidates) + ")");
    }
    x[v] += 1.0;
  }
  return x / static_cast<double>(votes.size());
}

Eigen::VectorXd pred_geomeans(const Eigen::MatrixXd& predictions) {
  if (predictions.rows() == 0) throw Error(ErrorCode::kEmptyInput, "pred_geomeans: no predictions");
  if (!(predictions.array() > 0.0).all()) {
    throw Error(ErrorCode::kNonPositivePrediction, "pred_geomeans: prediction entry <= 0");
  }
  return (predictions.array().log().colwise().sum() / static_cast<double>(predictions.rows()))
      .exp()
      .transpose();
}

Eigen::VectorXd bts_scores(std::span<const int> votes, const Eigen::MatrixXd& predictions,
                           const BtsvParams& params) {
  const auto n = static_cast<Eigen::Index>(votes.size());
  if (predictions.rows() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "bts_scores: " + std::to_string(n) + " votes but " +
                                                   std::to_string(predictions.rows()) + " predictions");
  }
  const int candidates = static_cast<int>(predictions.cols());
  const Eigen::VectorXd x = vote_shares(votes, candidates);
  const Eigen::VectorXd y = pred_geomeans(predictions);

  // Prediction score only sums over candidates with x̄_j > 0.
  Eigen::VectorXd scores(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = votes[static_cast<std::size_t>(i)];
    const double information = std::log(x[j] / y[j]);
    double prediction = 0.0;
    for (int c = 0; c < candidates; ++c) {
      if (x[c] > 0.0) prediction += x[c] * std::log(predictions(i, c) / x[c]);
    }
    scores[i] = information + params.alpha * prediction;
  }
  return scores;
}

double chs(std::span<const double> history, std::uint64_t k, std::uint64_t window_c) {
  const std::uint64_t first = k > window_c ? k - window_c : 0;
  double sum = 0.0;
  for (std::uint64_t r = first; r <= k && r < history.size(); ++r) sum += history[r];
  return sum;
}

double weight_of_vote(double chs_value, const BtsvParams& params) {
  return params.beta / (1.0 + std::exp(-params.theta * chs_value - params.epsilon));
}

void ScoreLedger::record(NodeId node, std::uint64_t round, double score) {
  auto& h = scores_[node];
  if (h.size() <= round) h.resize(round + 1, 0.0);
  h[round] = score;
}

double ScoreLedger::score(NodeId node, std::uint64_t round) const {
  auto it = scores_.find(node);
  if (it == scores_.end() || round >= it->second.size()) return 0.0;
  return it->second[round];
}

double ScoreLedger::chs(NodeId node, std::uint64_t round, std::uint64_t window_c) const {
  return pofel::chs(history(node), round, window_c);
}

double ScoreLedger::weight(NodeId node, std::uint64_t round, const BtsvParams& params) const {
  return weight_of_vote(chs(node, round, params.window_c), params);
}

std::span<const double> ScoreLedger::history(NodeId node) const {
  auto it = scores_.find(node);
  if (it == scores_.end()) return {};
  return it->second;
}

std::vector<NodeId> ScoreLedger::nodes() const {
  std::vector<NodeId> out;
  for (const auto& [n, h] : scores_) out.push_back(n);
  return out;
}

Eigen::VectorXd weighted_count(std::span<const int> votes, const Eigen::VectorXd& weights,
                               int n_candidates) {
  if (static_cast<Eigen::Index>(votes.size()) != weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "weighted_count: votes and weights differ in length");
  }
  Eigen::VectorXd adv = Eigen::VectorXd::Zero(n_candidates);
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (votes[i] < 0 || votes[i] >= n_candidates) {
      throw Error(ErrorCode::kInvalidArgument, "weighted_count: vote index out of range");
    }
    adv[votes[i]] += weights[static_cast<Eigen::Index>(i)];
  }
  return adv;
}

int argmax_lowest(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw Error(ErrorCode::kEmptyInput, "argmax_lowest: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return static_cast<int>(best);
}

TallyResult tally(std::span<const VoteSubmission> submissions, ScoreLedger& ledger,
                  const BtsvParams& params, std::uint64_t round) {
  if (submissions.empty()) throw Error(ErrorCode::kEmptyInput, "tally: no submissions");
  const auto n = static_cast<Eigen::Index>(submissions.size());

  TallyResult r;
  r.round = round;
  for (const auto& s : submissions) {
    r.voters.push_back(s.voter_id);
    r.candidates.push_back(s.voter_id);
  }
  std::sort(r.candidates.begin(), r.candidates.end());
  if (std::adjacent_find(r.candidates.begin(), r.candidates.end()) != r.candidates.end()) {
    throw Error(ErrorCode::kInvalidArgument, "tally: duplicate voter");
  }

  Eigen::MatrixXd predictions(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = submissions[static_cast<std::size_t>(i)];
    auto it = std::lower_bound(r.candidates.begin(), r.candidates.end(), s.vote);
    if (it == r.candidates.end() || *it != s.vote) {
      throw Error(ErrorCode::kInvalidArgument, "tally: vote for non-candidate " + std::to_string(s.vote));
    }
    if (s.prediction.size() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "tally: prediction of voter " +
                                                     std::to_string(s.voter_id) + " has wrong length");
    }
    r.vote_index.push_back(static_cast<int>(it - r.candidates.begin()));
    predictions.row(i) = s.prediction.transpose();
  }

  r.vote_shares = vote_shares(r.vote_index, static_cast<int>(n));
  r.pred_geomeans = pred_geomeans(predictions);
  r.scores = bts_scores(r.vote_index, predictions, params);

  r.chs.resize(n);
  r.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ledger.record(r.voters[static_cast<std::size_t>(i)], round, r.scores[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    r.chs[i] = ledger.chs(r.voters[static_cast<std::size_t>(i)], round, params.window_c);
    r.weights[i] = weight_of_vote(r.chs[i], params);
  }
  r.adjusted_votes = weighted_count(r.vote_index, r.weights, static_cast<int>(n));
  r.leader = r.candidates[static_cast<std::size_t>(argmax_lowest(r.adjusted_votes))];
  return r;
}

}  // namespace pofel
