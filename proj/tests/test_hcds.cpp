#include <doctest.h>

#include <bit>

#include "oracles.hpp"
#include "pofel/hcds.hpp"

using namespace pofel;

namespace {

ModelWeights vec(std::initializer_list<double> xs) {
  ModelWeights w(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) w[i++] = x;
  return w;
}

std::map<NodeId, PublicKey> roster(const std::vector<KeyPair>& keys) {
  std::map<NodeId, PublicKey> out;
  for (const auto& k : keys) out.emplace(k.node_id, k.public_key);
  return out;
}

std::vector<KeyPair> keys(int n, std::uint64_t seed = 1) {
  std::vector<KeyPair> out;
  for (NodeId i = 1; i <= n; ++i) out.push_back(KeyPair::from_seed(i, seed));
  return out;
}

Bytes nonce_of(std::uint8_t fill, std::size_t len = 32) { return Bytes(len, fill); }

}  // namespace

TEST_SUITE("hcds") {

TEST_CASE("canonical encoding matches an independent byte layout") {
  const std::vector<double> raw{1.0, -0.5, 3.14159, 1e-300, -0.0};
  ModelWeights w(5);
  for (int i = 0; i < 5; ++i) w[i] = raw[static_cast<std::size_t>(i)];
  const Bytes enc = encode_weights(w);
  CHECK(enc == oracle::encode(raw));
  CHECK(enc.size() == 8 + 8 * 5);

  const Bytes nonce = nonce_of(0xab);
  Bytes pre = nonce;
  const auto body = oracle::encode(raw);
  pre.insert(pre.end(), body.begin(), body.end());
  CHECK(commitment_digest(9, nonce, w, false) == sha256(pre));

  Bytes bound;
  oracle::put_u64(bound, 9);
  bound.insert(bound.end(), pre.begin(), pre.end());
  CHECK(commitment_digest(9, nonce, w, true) == sha256(bound));
}

TEST_CASE("commit examples") {
  const KeyPair k = KeyPair::from_seed(1, 7);
  const ModelWeights w = vec({1, 2, 3});
  const auto a = commit_with_nonce(w, k, 1, nonce_of(1), false);
  const auto b = commit_with_nonce(w, k, 1, nonce_of(1), false);
  CHECK(a.record.digest == b.record.digest);

  Rng rng(99);
  HcdsOptions opts;
  const auto c = commit(w, k, 1, opts, rng);
  const auto d = commit(w, k, 1, opts, rng);
  CHECK(c.record.digest != d.record.digest);
  CHECK(c.opening.nonce.size() == 32);
  CHECK(verify_commit(c.record, k.public_key).accepted);

  opts.nonce_len = 15;
  CHECK_THROWS_AS(commit(w, k, 1, opts, rng), Error);
}

TEST_CASE("verify_commit rejects foreign tags and flipped digests") {
  const auto ks = keys(2);
  const auto a = commit_with_nonce(vec({1}), ks[0], 1, nonce_of(1), false);
  const auto b = commit_with_nonce(vec({2}), ks[1], 1, nonce_of(2), false);
  CHECK(verify_commit(a.record, ks[0].public_key) == Verdict::accept());

  CommitRecord swapped = a.record;
  swapped.tag = b.record.tag;
  CHECK(verify_commit(swapped, ks[0].public_key) == Verdict::reject(RejectReason::kBadSignature));

  CommitRecord flipped = a.record;
  flipped.digest[5] ^= 0x01;
  CHECK(verify_commit(flipped, ks[0].public_key) == Verdict::reject(RejectReason::kBadSignature));
}

TEST_CASE("verify_reveal examples") {
  const auto ks = keys(2);
  const auto a = commit_with_nonce(vec({1, 2}), ks[0], 3, nonce_of(1), false);
  const auto b = commit_with_nonce(vec({5, 6}), ks[1], 3, nonce_of(2), false);
  CHECK(verify_reveal(a.reveal(), &a.record, ks[0].public_key, false).accepted);

  RevealRecord perturbed = a.reveal();
  perturbed.weights[1] = std::nextafter(perturbed.weights[1], 10.0);
  CHECK(verify_reveal(perturbed, &a.record, ks[0].public_key, false) ==
        Verdict::reject(RejectReason::kHashMismatch));

  RevealRecord stolen = b.reveal();
  stolen.node_id = 1;
  stolen.tag = a.record.tag;
  CHECK(verify_reveal(stolen, &a.record, ks[0].public_key, false) ==
        Verdict::reject(RejectReason::kHashMismatch));

  CHECK(verify_reveal(a.reveal(), nullptr, ks[0].public_key, false) ==
        Verdict::reject(RejectReason::kNoPriorCommit));

  RevealRecord bad_tag = a.reveal();
  bad_tag.tag = b.record.tag;
  CHECK(verify_reveal(bad_tag, &a.record, ks[0].public_key, false) ==
        Verdict::reject(RejectReason::kBadSignature));

  RevealRecord late = a.reveal();
  late.round = 4;
  CHECK(verify_reveal(late, &a.record, ks[0].public_key, false) == Verdict::reject(RejectReason::kWrongRound));
}

TEST_CASE("session: all honest nodes are accepted") {
  const auto ks = keys(6);
  HcdsSession s(1, roster(ks), HcdsOptions{});
  std::vector<HcdsMessage> inbox;
  std::vector<Commitment> cs;
  for (const auto& k : ks) cs.push_back(commit_with_nonce(ModelWeights::Constant(4, k.node_id), k, 1, nonce_of(7), false));
  for (const auto& c : cs) inbox.push_back(c.record);
  for (const auto& c : cs) inbox.push_back(c.reveal());
  const auto verdicts = session_run(s, inbox);
  CHECK(verdicts.size() == 6);
  for (const auto& [n, v] : verdicts) CHECK(v.verdict.accepted);
  CHECK(s.accepted_nodes().size() == 6);
  CHECK(s.verifications_per_node() == 5);
  CHECK(s.stats().signature_verifications == 12);
  CHECK(s.transcript().size() == 12);
}

TEST_CASE("session: a node that never reveals is a no-show") {
  const auto ks = keys(4);
  HcdsSession s(1, roster(ks), HcdsOptions{});
  std::vector<HcdsMessage> inbox;
  std::vector<Commitment> cs;
  for (const auto& k : ks) cs.push_back(commit_with_nonce(ModelWeights::Constant(2, k.node_id), k, 1, nonce_of(3), false));
  for (const auto& c : cs) inbox.push_back(c.record);
  for (std::size_t i = 0; i + 1 < cs.size(); ++i) inbox.push_back(cs[i].reveal());
  const auto v = session_run(s, inbox);
  CHECK(v.at(4).verdict == Verdict::reject(RejectReason::kNoShow));
  for (NodeId n = 1; n <= 3; ++n) CHECK(v.at(n).verdict.accepted);
}

TEST_CASE("session: a node that never commits is a no-show after the timeout") {
  const auto ks = keys(3);
  HcdsOptions opts;
  opts.timeout_steps = 5;
  HcdsSession s(1, roster(ks), opts);
  std::vector<Commitment> cs;
  for (std::size_t i = 0; i < 2; ++i) cs.push_back(commit_with_nonce(vec({1.0 + i}), ks[i], 1, nonce_of(3), false));
  for (const auto& c : cs) s.deliver(c.record);
  for (const auto& c : cs) s.deliver(c.reveal());
  CHECK(s.phase() == Phase::kCommitting);
  CHECK(s.verdicts().empty());  // reveals are held behind the barrier
  for (int t = 0; t < 4; ++t) s.tick();
  CHECK(s.phase() == Phase::kCommitting);
  s.tick();
  CHECK(s.phase() == Phase::kComplete);
  CHECK(s.verdicts().at(3).verdict == Verdict::reject(RejectReason::kNoShow));
  CHECK(s.verdicts().at(1).verdict.accepted);
}

TEST_CASE("session: the barrier hides commits until the phase closes") {
  const auto ks = keys(2);
  HcdsSession s(1, roster(ks), HcdsOptions{});
  const auto a = commit_with_nonce(vec({1}), ks[0], 1, nonce_of(1), false);
  s.deliver(a.record);
  CHECK(s.visible_commits().empty());
  HcdsOptions open;
  open.phase_barrier = false;
  HcdsSession t(1, roster(ks), open);
  t.deliver(a.record);
  CHECK(t.visible_commits().size() == 1);
}

TEST_CASE("session: wrong round and unknown senders") {
  const auto ks = keys(2);
  HcdsSession s(2, roster(ks), HcdsOptions{});
  const auto a = commit_with_nonce(vec({1}), ks[0], 1, nonce_of(1), false);
  s.deliver(a.record);
  CHECK(s.verdicts().at(1).verdict == Verdict::reject(RejectReason::kWrongRound));
  const auto outsider = commit_with_nonce(vec({1}), KeyPair::from_seed(9, 1), 2, nonce_of(1), false);
  s.deliver(outsider.record);
  CHECK(s.verdicts().count(9) == 0);
}

TEST_CASE("session: a reveal ahead of its commit is rejected") {
  const auto ks = keys(2);
  HcdsOptions open;
  open.phase_barrier = false;
  HcdsSession s(1, roster(ks), open);
  const auto a = commit_with_nonce(vec({1}), ks[0], 1, nonce_of(1), false);
  const auto b = commit_with_nonce(vec({2}), ks[1], 1, nonce_of(2), false);
  s.deliver(a.record);
  s.deliver(b.reveal());
  s.deliver(b.record);
  s.deliver(a.reveal());
  s.finish();
  CHECK(s.verdicts().at(2).verdict == Verdict::reject(RejectReason::kNoPriorCommit));
  CHECK(s.verdicts().at(1).verdict.accepted);
}

TEST_CASE("session: duplicate digests flag both, later arrival loses when identity is unbound") {
  const auto ks = keys(3);
  HcdsOptions open;
  open.phase_barrier = false;
  HcdsSession s(1, roster(ks), open);
  const auto victim = commit_with_nonce(vec({4, 4}), ks[0], 1, nonce_of(5), false);
  CommitRecord echo{2, 1, victim.record.digest, sign(victim.record.digest, ks[1])};
  const auto honest = commit_with_nonce(vec({1, 1}), ks[2], 1, nonce_of(6), false);
  s.deliver(victim.record);
  s.deliver(echo);
  s.deliver(honest.record);
  s.deliver(victim.reveal());
  RevealRecord forged = victim.reveal();
  forged.node_id = 2;
  forged.tag = echo.tag;
  s.deliver(forged);
  s.deliver(honest.reveal());
  s.finish();
  CHECK(s.verdicts().at(2).verdict == Verdict::reject(RejectReason::kDuplicateDigest));
  CHECK(s.verdicts().at(2).duplicate);
  CHECK(s.verdicts().at(1).duplicate);
  CHECK(s.verdicts().at(1).verdict.accepted);
  CHECK(s.verdicts().at(3).verdict.accepted);
  CHECK_FALSE(s.verdicts().at(3).duplicate);
}

TEST_CASE("session: with identity binding the echoed digest cannot be opened") {
  const auto ks = keys(2);
  HcdsOptions open;
  open.phase_barrier = false;
  open.bind_identity = true;
  HcdsSession s(1, roster(ks), open);
  const auto victim = commit_with_nonce(vec({4, 4}), ks[0], 1, nonce_of(5), true);
  CommitRecord echo{2, 1, victim.record.digest, sign(victim.record.digest, ks[1])};
  s.deliver(victim.record);
  s.deliver(echo);
  s.deliver(victim.reveal());
  RevealRecord forged = victim.reveal();
  forged.node_id = 2;
  forged.tag = echo.tag;
  s.deliver(forged);
  s.finish();
  CHECK(s.verdicts().at(1).verdict.accepted);
  CHECK(s.verdicts().at(2).verdict == Verdict::reject(RejectReason::kHashMismatch));
}

TEST_CASE("transcript json has the stable field set") {
  const auto ks = keys(2);
  HcdsSession s(1, roster(ks), HcdsOptions{});
  std::vector<HcdsMessage> inbox;
  std::vector<Commitment> cs;
  for (const auto& k : ks) cs.push_back(commit_with_nonce(vec({0.25}), k, 1, nonce_of(static_cast<std::uint8_t>(k.node_id)), false));
  for (const auto& c : cs) inbox.push_back(c.record);
  for (const auto& c : cs) inbox.push_back(c.reveal());
  session_run(s, inbox);
  const auto commit_json = transcript_entry_json(s.transcript().front());
  for (const char* key : {"node_id", "round", "phase", "digest", "nonce", "weights", "tag", "verdict"}) {
    CHECK(commit_json.contains(key));
  }
  CHECK(commit_json["phase"] == "commit");
  CHECK(commit_json["digest"] == to_hex(cs[0].record.digest));
  CHECK(commit_json["tag"] == to_base64(cs[0].record.tag));
  const auto reveal_json = transcript_entry_json(s.transcript().back());
  CHECK(reveal_json["phase"] == "reveal");
  CHECK(reveal_json["verdict"] == "ACCEPTED");
  CHECK(reveal_json["weights"][0] == 0.25);
}

TEST_CASE("property: hiding, digest bits are balanced over 10^4 commits") {
  const KeyPair k = KeyPair::from_seed(1, 3);
  Rng rng(2024);
  HcdsOptions opts;
  std::array<int, 256> ones{};
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    // Two fixed, distinct models alternate; only the nonce differs.
    const ModelWeights w = t % 2 ? ModelWeights::Constant(8, 1.0) : ModelWeights::Zero(8);
    const Digest d = commit(w, k, 1, opts, rng).record.digest;
    for (int bit = 0; bit < 256; ++bit) ones[static_cast<std::size_t>(bit)] += (d[static_cast<std::size_t>(bit / 8)] >> (bit % 8)) & 1;
  }
  for (int c : ones) {
    const double freq = static_cast<double>(c) / trials;
    CHECK(freq > 0.45);
    CHECK(freq < 0.55);
  }
}

TEST_CASE("property: binding, any change to nonce or weights is rejected") {
  const KeyPair k = KeyPair::from_seed(1, 4);
  Rng rng(77);
  HcdsOptions opts;
  std::uniform_int_distribution<int> dim(1, 12), which(0, 3), byte(0, 255);
  std::normal_distribution<double> value(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    ModelWeights w(dim(rng));
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = value(rng);
    const auto c = commit(w, k, 1, opts, rng);
    RevealRecord r = c.reveal();
    std::uniform_int_distribution<Eigen::Index> coord(0, w.size() - 1);
    switch (which(rng)) {
      case 0: r.weights[coord(rng)] += std::ldexp(1.0, -40); break;
      case 1: r.nonce[static_cast<std::size_t>(byte(rng)) % r.nonce.size()] ^= static_cast<std::uint8_t>(1 + byte(rng) % 255); break;
      case 2: r.weights.conservativeResize(w.size() + 1); r.weights[w.size()] = 0.0; break;
      default: {
        const Eigen::Index i = coord(rng);
        r.weights[i] = -r.weights[i] - 1.0;
        break;
      }
    }
    CHECK_FALSE(verify_reveal(r, &c.record, k.public_key, false).accepted);
  }
}

}  // TEST_SUITE
