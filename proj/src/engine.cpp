#include "pofel/engine.hpp"

#include <algorithm>

namespace pofel {

void EngineConfig::validate() const {
  if (n_nodes < 2) throw Error(ErrorCode::kConfig, "network.n_nodes: must be at least 2");
  fel.validate();
  consensus.btsv.validate();
  if (!(consensus.g_max > 0.0 && consensus.g_max < 1.0)) {
    throw Error(ErrorCode::kConfig, "consensus.g_max: must lie in (0, 1)");
  }
  if (consensus.hcds.nonce_len < 16) {
    throw Error(ErrorCode::kConfig, "consensus.nonce_len: must be at least 16 bytes");
  }
  if (consensus.hcds.timeout_steps < 1) {
    throw Error(ErrorCode::kConfig, "consensus.timeout_steps: must be positive");
  }
  if (holdout_size < 1) throw Error(ErrorCode::kConfig, "fel.holdout_size: must be positive");
  check_adversary_fraction(adversaries, n_nodes, allow_majority);
}

RoundEngine::RoundEngine(EngineConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  cfg_.fel.seed = cfg_.seed;
  for (NodeId n = 1; n <= cfg_.n_nodes; ++n) {
    clusters_.emplace_back(cfg_.fel, n);
    keys_.push_back(KeyPair::from_seed(n, cfg_.seed));
  }
  for (std::size_t a = 0; a < cfg_.adversaries.size(); ++a) {
    const NodeId n = cfg_.adversaries[a].node_id;
    adversary_index_[n] = a;
    adversary_rng_.emplace(n, make_rng(cfg_.seed, "adversary", {static_cast<std::uint64_t>(n)}));
  }
  global_ = ModelWeights::Zero(cfg_.fel.model_dim);
  if (cfg_.fel.trainer == Trainer::kToyClassifier) {
    holdout_ = generate_holdout(cfg_.fel, cfg_.holdout_size);
    initial_loss_ = softmax_loss(*holdout_, global_, cfg_.fel);
  }
}

const AdversaryProfile* RoundEngine::adversary(NodeId node) const {
  auto it = adversary_index_.find(node);
  return it == adversary_index_.end() ? nullptr : &cfg_.adversaries[it->second];
}

std::optional<double> RoundEngine::holdout_loss(const ModelWeights& w) const {
  if (!holdout_) return std::nullopt;
  return softmax_loss(*holdout_, w, cfg_.fel);
}

RoundRecord RoundEngine::run_round() {
  const std::uint64_t k = ledger_.next_round();
  const std::uint64_t attempt = ++attempts_;
  const int n = cfg_.n_nodes;
  const auto& hopts = cfg_.consensus.hcds;

  RoundRecord rec;
  rec.round = k;

  // Plagiarists decide up front whether they attack (and skip training) this round.
  std::set<NodeId> plagiarising;
  for (const auto& p : cfg_.adversaries) {
    if (p.kind != AdversaryKind::kPlagiarist) continue;
    std::bernoulli_distribution act(p.cbm);
    if (act(adversary_rng_.at(p.node_id))) plagiarising.insert(p.node_id);
  }

  std::map<NodeId, PublicKey> participants;
  for (const auto& key : keys_) participants.emplace(key.node_id, key.public_key);
  HcdsSession session(k, participants, hopts);

  // Commit stage.
  std::vector<Commitment> honest;
  for (NodeId node = 1; node <= n; ++node) {
    if (plagiarising.count(node)) continue;
    const ModelWeights w = clusters_[static_cast<std::size_t>(node - 1)].run_round(global_);
    Rng nonce_rng = make_rng(cfg_.seed, "nonce",
                             {static_cast<std::uint64_t>(node), k, attempt});
    honest.push_back(commit(w, key(node), k, hopts, nonce_rng));
  }
  Rng delivery = make_rng(cfg_.seed, "delivery", {k, attempt});
  std::vector<std::size_t> order(honest.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), delivery);
  for (std::size_t i : order) session.deliver(honest[i].record);

  // Rushing attackers go last and see whatever the session exposes.
  std::map<NodeId, PlagiaristAttempt> attempts;
  for (NodeId node : plagiarising) {
    auto& rng = adversary_rng_.at(node);
    const auto visible = session.visible_commits();
    attempts.emplace(node, plagiarist_commit(*adversary(node), visible, key(node), k,
                                             cfg_.fel.model_dim, hopts, rng));
    session.deliver(attempts.at(node).commit);
  }
  while (session.phase() == Phase::kCommitting) session.tick();

  // Reveal stage.
  std::shuffle(order.begin(), order.end(), delivery);
  for (std::size_t i : order) session.deliver(honest[i].reveal());
  for (NodeId node : plagiarising) {
    const auto visible = session.visible_reveals();
    auto forged = plagiarist_reveal(*adversary(node), attempts.at(node), visible,
                                    adversary_rng_.at(node));
    if (forged) session.deliver(*forged);
  }
  session.finish();

  rec.hcds_verdicts = session.verdicts();
  rec.hcds_stats = session.stats();
  rec.dverify_per_node = session.verifications_per_node();
  rec.transcript = session.transcript();
  rec.adversaries_acted = plagiarising;

  const std::vector<NodeId> survivors = session.accepted_nodes();
  if (survivors.size() < 2) {
    rec.aborted = true;
    rec.abort_reason = "no quorum: " + std::to_string(survivors.size()) + " node(s) survived HCDS";
    return rec;
  }

  RoundInputs& in = rec.inputs;
  in.round = k;
  in.participants = survivors;
  for (NodeId node : survivors) {
    in.models.push_back(session.accepted_reveal(node)->weights);
    in.sizes.push_back(clusters_[static_cast<std::size_t>(node - 1)].info().dataset_size);
  }

  // Model evaluation: identical public inputs give one honest result.
  const Evaluation ev = model_evaluation(in.participants, in.models, in.sizes, survivors.front(),
                                         cfg_.consensus.g_max, k);
  if (cfg_.consensus.verify_unanimity) {
    for (NodeId node : survivors) {
      const Evaluation mine = model_evaluation(in.participants, in.models, in.sizes, node,
                                               cfg_.consensus.g_max, k);
      if (mine.submission.vote != ev.submission.vote ||
          mine.submission.prediction != ev.submission.prediction ||
          mine.global_model != ev.global_model) {
        throw Error(ErrorCode::kInvalidArgument, "honest model evaluations disagree");
      }
    }
  }
  for (std::size_t m = 0; m < survivors.size(); ++m) {
    rec.similarity[survivors[m]] = ev.similarities[static_cast<Eigen::Index>(m)];
  }

  for (NodeId node : survivors) {
    const AdversaryProfile* p = adversary(node);
    if (p && p->kind == AdversaryKind::kBribedVoter) {
      BribedVote bv = bribed_vote(*p, node, k, ev.submission.vote, survivors,
                                  cfg_.consensus.g_max, adversary_rng_.at(node));
      if (bv.acted) rec.adversaries_acted.insert(node);
      in.submissions.push_back(std::move(bv.submission));
    } else {
      VoteSubmission s = ev.submission;
      s.voter_id = node;
      in.submissions.push_back(std::move(s));
    }
  }

  TallyResult t = tally(in.submissions, scores_, cfg_.consensus.btsv, k);
  for (NodeId node = 1; node <= n; ++node) {
    if (!std::binary_search(survivors.begin(), survivors.end(), node)) scores_.record(node, k, 0.0);
  }

  Block block = build_block(in, ev.global_model, t, ledger_.head_digest(), cfg_.consensus.ledger_mode);
  ledger_.append(block);
  global_ = ev.global_model;
  inputs_.push_back(in);

  rec.leader = t.leader;
  for (const auto& s : in.submissions) rec.vote[s.voter_id] = s.vote;
  for (NodeId node = 1; node <= n; ++node) {
    rec.score[node] = scores_.score(node, k);
    rec.chs[node] = scores_.chs(node, k, cfg_.consensus.btsv.window_c);
    rec.wv[node] = weight_of_vote(rec.chs[node], cfg_.consensus.btsv);
  }
  rec.tally = std::move(t);
  rec.global_loss = holdout_loss(global_);
  return rec;
}

Block RoundEngine::run_round_strict() {
  RoundRecord r = run_round();
  if (r.aborted) throw Error(ErrorCode::kNoQuorum, r.abort_reason);
  return ledger_.blocks().back();
}

}  // namespace pofel
