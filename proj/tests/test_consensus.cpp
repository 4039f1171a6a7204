#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "pofel/block_codec.hpp"
#include "pofel/engine.hpp"

using namespace pofel;

namespace {

ModelWeights vec(std::initializer_list<double> xs) {
  ModelWeights w(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) w[i++] = x;
  return w;
}

double plain_cosine(const ModelWeights& a, const ModelWeights& b) {
  double dot = 0, na = 0, nb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

EngineConfig small_engine(int n, std::uint64_t seed, LedgerMode mode = LedgerMode::kFullModels) {
  EngineConfig cfg;
  cfg.n_nodes = n;
  cfg.seed = seed;
  cfg.fel.model_dim = 8;
  cfg.consensus.ledger_mode = mode;
  return cfg;
}

struct Chain {
  std::vector<Block> blocks;
  std::vector<RoundInputs> inputs;
};

Chain build_chain(int n, int rounds, std::uint64_t seed, LedgerMode mode = LedgerMode::kFullModels) {
  RoundEngine engine(small_engine(n, seed, mode));
  for (int r = 0; r < rounds; ++r) engine.run_round_strict();
  return {engine.ledger().blocks(), engine.round_inputs()};
}

}  // namespace

TEST_SUITE("consensus") {

TEST_CASE("model evaluation votes for the model closest to the aggregate") {
  const std::vector<NodeId> ids{1, 2, 3};
  const std::vector<ModelWeights> models{vec({1, 0}), vec({0.9, 0.1}), vec({0, 1})};
  const std::vector<std::int64_t> sizes{10, 10, 10};
  const Evaluation e = model_evaluation(ids, models, sizes, 3, 0.99, 4);
  const ModelWeights gw = vec({1.9 / 3, 1.1 / 3});
  CHECK((e.global_model - gw).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(e.similarities[i] - plain_cosine(models[static_cast<std::size_t>(i)], gw)) < 1e-12);
  CHECK(e.submission.vote == 2);
  CHECK(e.submission.voter_id == 3);
  CHECK(e.submission.round == 4);
  const auto expect = oracle::honest_prediction(3, 1, 0.99);
  for (int j = 0; j < 3; ++j) CHECK(e.submission.prediction[j] == doctest::Approx(expect[static_cast<std::size_t>(j)]).epsilon(1e-15));
}

TEST_CASE("identical models elect the lowest id") {
  const std::vector<NodeId> ids{4, 7, 9};
  const std::vector<ModelWeights> models(3, vec({0.3, -0.2, 0.5}));
  const std::vector<std::int64_t> sizes{1, 2, 3};
  CHECK(model_evaluation(ids, models, sizes, 9, 0.99, 1).submission.vote == 4);
}

TEST_CASE("two nodes with sizes weighting the aggregate") {
  const std::vector<NodeId> ids{1, 2};
  const std::vector<ModelWeights> models{vec({1, 0}), vec({0, 1})};
  const std::vector<std::int64_t> sizes{1, 3};
  const Evaluation e = model_evaluation(ids, models, sizes, 1, 0.9, 1);
  CHECK(e.global_model == vec({0.25, 0.75}));
  CHECK(e.submission.vote == 2);
  CHECK((e.submission.prediction - Eigen::Vector2d(0.1, 0.9)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("engine chain links every block to its predecessor") {
  const Chain c = build_chain(6, 5, 11);
  REQUIRE(c.blocks.size() == 5);
  Digest prev = Ledger::genesis_digest();
  for (std::size_t i = 0; i < c.blocks.size(); ++i) {
    CHECK(c.blocks[i].round == i + 1);
    CHECK(c.blocks[i].prev_digest == prev);
    CHECK(c.blocks[i].digest == compute_block_digest(c.blocks[i]));
    CHECK(c.blocks[i].digest == sha256(canonical_encoding(c.blocks[i])));
    prev = c.blocks[i].digest;
  }
  std::size_t failed = 99;
  CHECK(verify_chain(c.blocks, c.inputs, BtsvParams{}, &failed).accepted);
}

TEST_CASE("tampered blocks are rejected with the matching reason") {
  const Chain c = build_chain(6, 3, 12);
  const BtsvParams params;

  auto reason_after = [&](auto mutate, bool rehash) {
    std::vector<Block> blocks = c.blocks;
    mutate(blocks[1]);
    if (rehash) blocks[1].digest = compute_block_digest(blocks[1]);
    std::size_t failed = 99;
    const BlockVerdict v = verify_chain(blocks, c.inputs, params, &failed);
    CHECK(failed == 1);
    return v.reason;
  };

  CHECK(reason_after([](Block& b) { b.global_model[0] += 1e-6; }, true) == BlockReject::kBadAggregate);
  CHECK(reason_after([](Block& b) { b.leader_id = b.leader_id == 1 ? 2 : 1; }, true) == BlockReject::kBadLeader);
  CHECK(reason_after([](Block& b) { b.prev_digest[0] ^= 1; }, true) == BlockReject::kBadChain);
  CHECK(reason_after([](Block& b) { b.tally.scores[0] += 0.5; }, true) == BlockReject::kBadTally);
  CHECK(reason_after([](Block& b) { b.global_model[0] += 1e-6; }, false) != BlockReject::kNone);
  CHECK(reason_after([](Block& b) { b.digest[5] ^= 0x10; }, false) == BlockReject::kBadDigest);
}

TEST_CASE("ledger append enforces round order and linkage") {
  const Chain c = build_chain(4, 2, 13);
  Ledger l;
  CHECK_THROWS_AS(l.append(c.blocks[1]), Error);
  l.append(c.blocks[0]);
  CHECK(l.next_round() == 2);
  Block bad = c.blocks[1];
  bad.digest[0] ^= 1;
  CHECK_THROWS_AS(l.append(bad), Error);
  l.append(c.blocks[1]);
  CHECK(l.head_digest() == c.blocks[1].digest);
}

TEST_CASE("digests-only blocks carry model digests but no weights") {
  const Chain c = build_chain(5, 2, 14, LedgerMode::kDigestsOnly);
  for (const auto& b : c.blocks) {
    for (const auto& m : b.models) CHECK(m.weights.size() == 0);
  }
  const auto& b = c.blocks[0];
  for (std::size_t i = 0; i < b.models.size(); ++i) {
    CHECK(b.models[i].model_digest == model_digest(c.inputs[0].models[i]));
  }
  CHECK(verify_chain(c.blocks, c.inputs, BtsvParams{}).accepted);
  const Chain full = build_chain(5, 2, 14);
  CHECK(canonical_encoding(b).size() < canonical_encoding(full.blocks[0]).size());
}

TEST_CASE("jsonl codec round trip") {
  for (auto mode : {LedgerMode::kFullModels, LedgerMode::kDigestsOnly}) {
    const Chain c = build_chain(5, 3, 15, mode);
    std::ostringstream out;
    write_ledger_jsonl(out, c.blocks);
    std::istringstream in(out.str());
    const auto back = read_ledger_jsonl(in);
    CHECK(back == c.blocks);
    for (const auto& b : c.blocks) CHECK(block_to_line(block_from_line(block_to_line(b))) == block_to_line(b));
  }
}

TEST_CASE("property: any single-byte mutation of a ledger line fails parse or verification") {
  const Chain c = build_chain(4, 2, 16);
  std::mt19937_64 rng(5);
  int checked = 0;
  for (std::size_t bi = 0; bi < c.blocks.size(); ++bi) {
    const std::string line = block_to_line(c.blocks[bi]);
    std::uniform_int_distribution<std::size_t> pos(0, line.size() - 1);
    std::uniform_int_distribution<int> byte(1, 255);
    for (int trial = 0; trial < 200; ++trial) {
      std::string bad = line;
      const std::size_t p = pos(rng);
      bad[p] = static_cast<char>(static_cast<unsigned char>(bad[p]) ^ byte(rng));
      bool rejected = false;
      try {
        std::vector<Block> blocks = c.blocks;
        blocks[bi] = block_from_line(bad);
        rejected = !verify_chain(blocks, c.inputs, BtsvParams{}).accepted;
      } catch (const Error& e) {
        rejected = e.code() == ErrorCode::kParse;
      }
      CHECK(rejected);
      ++checked;
    }
  }
  CHECK(checked == 400);
}

TEST_CASE("strict parser rejects unknown keys and trailing data") {
  const Chain c = build_chain(3, 1, 17);
  nlohmann::json j = block_to_json(c.blocks[0]);
  j["extra"] = 1;
  CHECK_THROWS_AS(block_from_line(j.dump()), Error);
  CHECK_THROWS_AS(block_from_line(block_to_line(c.blocks[0]) + " "), Error);
  CHECK_THROWS_AS(block_from_line("{}"), Error);
  CHECK_THROWS_AS(block_from_line("not json"), Error);
}

}  // TEST_SUITE
