#include "pofel/consensus.hpp"

#include <algorithm>
#include <cstring>

#include "pofel/hcds.hpp"

namespace pofel {

Evaluation model_evaluation(std::span<const NodeId> node_ids, std::span<const ModelWeights> models,
                            std::span<const std::int64_t> sizes, NodeId self_id, double g_max,
                            std::uint64_t round) {
  if (node_ids.size() != models.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "model_evaluation: ids and models differ in length");
  }
  if (!std::is_sorted(node_ids.begin(), node_ids.end())) {
    throw Error(ErrorCode::kInvalidArgument, "model_evaluation: node ids must be ascending");
  }
  Evaluation ev;
  ev.global_model = aggregate_global(models, sizes);
  const std::size_t best = most_similar(models, ev.global_model, &ev.similarities);
  ev.submission.voter_id = self_id;
  ev.submission.round = round;
  ev.submission.vote = node_ids[best];
  ev.submission.prediction = honest_prediction(models.size(), best, g_max);
  return ev;
}

Digest model_digest(const ModelWeights& weights) { return sha256(encode_weights(weights)); }

Bytes canonical_encoding(const Block& block) {
  Bytes out;
  static constexpr char kTag[] = "pofel-block-v1";
  out.insert(out.end(), kTag, kTag + sizeof(kTag) - 1);
  append_u64_be(out, block.round);
  append_u64_be(out, static_cast<std::uint64_t>(block.leader_id));
  out.push_back(block.mode == LedgerMode::kFullModels ? 0 : 1);
  out.insert(out.end(), block.prev_digest.begin(), block.prev_digest.end());

  append_u64_be(out, block.models.size());
  for (const auto& m : block.models) {
    append_u64_be(out, static_cast<std::uint64_t>(m.node_id));
    append_u64_be(out, static_cast<std::uint64_t>(m.size));
    out.insert(out.end(), m.model_digest.begin(), m.model_digest.end());
    if (block.mode == LedgerMode::kFullModels) encode_weights_into(out, m.weights);
  }
  encode_weights_into(out, block.global_model);

  const auto& t = block.tally;
  append_u64_be(out, t.participants.size());
  for (NodeId p : t.participants) append_u64_be(out, static_cast<std::uint64_t>(p));
  append_u64_be(out, t.votes.size());
  for (NodeId v : t.votes) append_u64_be(out, static_cast<std::uint64_t>(v));
  for (const auto* series : {&t.scores, &t.weights, &t.adjusted_votes}) {
    append_u64_be(out, series->size());
    for (double x : *series) append_f64_be(out, x);
  }
  return out;
}

Digest compute_block_digest(const Block& block) { return sha256(canonical_encoding(block)); }

Block build_block(const RoundInputs& inputs, const ModelWeights& global_model,
                  const TallyResult& tally, const Digest& prev_digest, LedgerMode mode) {
  Block b;
  b.round = inputs.round;
  b.leader_id = tally.leader;
  b.mode = mode;
  for (std::size_t m = 0; m < inputs.participants.size(); ++m) {
    ModelEntry e;
    e.node_id = inputs.participants[m];
    e.size = inputs.sizes[m];
    e.model_digest = model_digest(inputs.models[m]);
    if (mode == LedgerMode::kFullModels) e.weights = inputs.models[m];
    b.models.push_back(std::move(e));
  }
  b.global_model = global_model;

  // Per-participant columns in ascending id order.
  b.tally.participants = tally.candidates;
  for (NodeId p : tally.candidates) {
    const auto i = static_cast<Eigen::Index>(
        std::find(tally.voters.begin(), tally.voters.end(), p) - tally.voters.begin());
    b.tally.votes.push_back(tally.candidates[static_cast<std::size_t>(tally.vote_index[static_cast<std::size_t>(i)])]);
    b.tally.scores.push_back(tally.scores[i]);
    b.tally.weights.push_back(tally.weights[i]);
  }
  b.tally.adjusted_votes.assign(tally.adjusted_votes.data(),
                                tally.adjusted_votes.data() + tally.adjusted_votes.size());
  b.prev_digest = prev_digest;
  b.digest = compute_block_digest(b);
  return b;
}

void Ledger::append(Block block) {
  if (block.round != next_round()) {
    throw Error(ErrorCode::kInvalidArgument, "ledger: expected round " + std::to_string(next_round()) +
                                                 ", got " + std::to_string(block.round));
  }
  if (block.prev_digest != head_digest()) {
    throw Error(ErrorCode::kInvalidArgument, "ledger: prev_digest does not match head");
  }
  if (block.digest != compute_block_digest(block)) {
    throw Error(ErrorCode::kInvalidArgument, "ledger: block digest does not match its contents");
  }
  blocks_.push_back(std::move(block));
}

const char* to_string(BlockReject r) {
  switch (r) {
    case BlockReject::kNone: return "none";
    case BlockReject::kBadChain: return "bad-chain";
    case BlockReject::kBadAggregate: return "bad-aggregate";
    case BlockReject::kBadLeader: return "bad-leader";
    case BlockReject::kBadTally: return "bad-tally";
    case BlockReject::kBadDigest: return "bad-digest";
    case BlockReject::kBadEncoding: return "bad-encoding";
  }
  return "unknown";
}

std::string BlockVerdict::str() const {
  if (accepted) return "ACCEPTED";
  std::string s = std::string("REJECTED(") + to_string(reason) + ")";
  if (!detail.empty()) s += ": " + detail;
  return s;
}

namespace {

BlockVerdict reject(BlockReject r, std::string detail) { return {false, r, std::move(detail)}; }

bool bitwise_equal(const ModelWeights& a, const ModelWeights& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

BlockVerdict verify_block(const Block& block, const Digest& expected_prev,
                          std::uint64_t expected_round, const RoundInputs& inputs,
                          const ScoreLedger& prior_scores, const BtsvParams& params) {
  if (block.round != expected_round) {
    return reject(BlockReject::kBadChain, "round " + std::to_string(block.round) + ", expected " +
                                              std::to_string(expected_round));
  }
  if (block.prev_digest != expected_prev) return reject(BlockReject::kBadChain, "prev_digest mismatch");

  const std::size_t n = inputs.participants.size();
  if (block.models.size() != n) return reject(BlockReject::kBadAggregate, "model count mismatch");
  for (std::size_t m = 0; m < n; ++m) {
    const auto& e = block.models[m];
    if (e.node_id != inputs.participants[m] || e.size != inputs.sizes[m] ||
        e.model_digest != model_digest(inputs.models[m])) {
      return reject(BlockReject::kBadAggregate, "model entry " + std::to_string(m) + " mismatch");
    }
    if (block.mode == LedgerMode::kFullModels ? !bitwise_equal(e.weights, inputs.models[m])
                                              : e.weights.size() != 0) {
      return reject(BlockReject::kBadAggregate, "model weights " + std::to_string(m) + " mismatch");
    }
  }
  ModelWeights gw;
  try {
    gw = aggregate_global(inputs.models, inputs.sizes);
  } catch (const Error& e) {
    return reject(BlockReject::kBadAggregate, e.what());
  }
  if (!bitwise_equal(gw, block.global_model)) {
    return reject(BlockReject::kBadAggregate, "global model differs from recomputation");
  }

  ScoreLedger scores = prior_scores;
  TallyResult t;
  try {
    t = tally(inputs.submissions, scores, params, block.round);
  } catch (const Error& e) {
    return reject(BlockReject::kBadTally, e.what());
  }
  if (t.leader != block.leader_id) {
    return reject(BlockReject::kBadLeader, "leader " + std::to_string(block.leader_id) +
                                               ", recomputed " + std::to_string(t.leader));
  }
  const Block expected = build_block(inputs, gw, t, expected_prev, block.mode);
  if (expected.tally.participants != block.tally.participants ||
      expected.tally.votes != block.tally.votes ||
      !bitwise_equal(expected.tally.scores, block.tally.scores) ||
      !bitwise_equal(expected.tally.weights, block.tally.weights) ||
      !bitwise_equal(expected.tally.adjusted_votes, block.tally.adjusted_votes)) {
    return reject(BlockReject::kBadTally, "tally record differs from recomputation");
  }
  if (block.digest != compute_block_digest(block)) {
    return reject(BlockReject::kBadDigest, "digest does not match contents");
  }
  return {true, BlockReject::kNone, {}};
}

BlockVerdict verify_chain(std::span<const Block> blocks, std::span<const RoundInputs> inputs,
                          const BtsvParams& params, std::size_t* failed_index) {
  if (blocks.size() != inputs.size()) {
    if (failed_index) *failed_index = std::min(blocks.size(), inputs.size());
    return reject(BlockReject::kBadChain, "block count differs from round inputs");
  }
  ScoreLedger scores;
  Digest prev = Ledger::genesis_digest();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto v = verify_block(blocks[i], prev, i + 1, inputs[i], scores, params);
    if (!v.accepted) {
      if (failed_index) *failed_index = i;
      return v;
    }
    tally(inputs[i].submissions, scores, params, blocks[i].round);
    prev = blocks[i].digest;
  }
  return {true, BlockReject::kNone, {}};
}

}  // namespace pofel
